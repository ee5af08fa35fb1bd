"""Four-outcome scoring and the FIR / IRL / APT metrics.

Every scored session is classified TP / FP / FN / TN with a time penalty:
TP pays the response latency (stop - break), FP pays the turn duration
(or the remaining turn, mode-switched), FN pays the superfluous audio
after the break, TN pays nothing. APT is the mean penalty per case.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .manifest import EvalInstance, Language


class FpPenaltyMode(str, Enum):
    FULL_TURN = "FullTurn"
    REMAINING_TURN = "RemainingTurn"


class OutcomeKind(str, Enum):
    TP = "TP"
    FP = "FP"
    FN = "FN"
    TN = "TN"


class ScoringError(Exception):
    pass


@dataclass(frozen=True)
class StopEvent:
    """Registered stop time of one session; None = never stopped within the turn."""
    stop_time_s: float | None = None


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    penalty_s: float
    instance_id: str
    language: Language | None = None
    category: str | None = None


@dataclass(frozen=True)
class MetricBlock:
    fir: float
    apt_s: float
    n: int
    counts: dict[OutcomeKind, int]
    irl_s: float | None = None


@dataclass(frozen=True)
class MacroAverages:
    irl_s: float | None
    fir: float
    apt_s: float


#: Report group names, in table column order.
GROUP_EN = "EN"
GROUP_ZH = "ZH"
GROUP_NOISE_SILENCE = "NoiseSilence"
GROUP_ORDER = (GROUP_EN, GROUP_ZH, GROUP_NOISE_SILENCE)


def group_of(language: Language) -> str:
    return {Language.EN: GROUP_EN, Language.ZH: GROUP_ZH, Language.NONE: GROUP_NOISE_SILENCE}[language]


def classify_outcome(instance: EvalInstance, stop: StopEvent,
                     fp_penalty_mode: FpPenaltyMode = FpPenaltyMode.FULL_TURN) -> Outcome:
    """Classify one (instance, stop) pair into TP/FP/FN/TN with its penalty."""
    turn = instance.turn_duration_s
    stop_s = stop.stop_time_s
    if stop_s is not None:
        if stop_s < 0:
            raise ScoringError(f"instance {instance.id!r}: negative stop time {stop_s}")
        if stop_s > turn:
            raise ScoringError(
                f"instance {instance.id!r}: stop time {stop_s} beyond turn duration {turn}")

    def fp_penalty() -> float:
        if fp_penalty_mode is FpPenaltyMode.FULL_TURN:
            return turn
        return turn - stop_s

    b = instance.break_time_s
    if b is not None:
        if stop_s is None:
            kind, penalty = OutcomeKind.FN, turn - b
        elif stop_s < b:
            kind, penalty = OutcomeKind.FP, fp_penalty()
        else:
            kind, penalty = OutcomeKind.TP, stop_s - b
    else:
        if stop_s is None:
            kind, penalty = OutcomeKind.TN, 0.0
        else:
            kind, penalty = OutcomeKind.FP, fp_penalty()

    return Outcome(kind=kind, penalty_s=penalty, instance_id=instance.id,
                   language=instance.language, category=instance.category.value)


def compute_block(outcomes: list[Outcome]) -> MetricBlock:
    """FIR, IRL (mean TP penalty, absent without TPs) and APT over one group."""
    if not outcomes:
        raise ScoringError("cannot compute metrics over an empty outcome list")
    counts = {kind: 0 for kind in OutcomeKind}
    penalty_sum = 0.0
    tp_sum = 0.0
    for o in outcomes:
        counts[o.kind] += 1
        penalty_sum += o.penalty_s
        if o.kind is OutcomeKind.TP:
            tp_sum += o.penalty_s
    n = len(outcomes)
    irl = tp_sum / counts[OutcomeKind.TP] if counts[OutcomeKind.TP] else None
    return MetricBlock(fir=counts[OutcomeKind.FP] / n, apt_s=penalty_sum / n,
                       n=n, counts=counts, irl_s=irl)


def score_from_log(instances: list[EvalInstance], log: dict[str, StopEvent],
                   mode: FpPenaltyMode = FpPenaltyMode.FULL_TURN) -> list[Outcome]:
    """Score externally measured stop times. Instances missing from the log
    are scored as never-stopped."""
    known = {inst.id for inst in instances}
    unknown = sorted(set(log) - known)
    if unknown:
        raise ScoringError(f"stop log references unknown instance ids: {unknown}")
    return [classify_outcome(inst, log.get(inst.id, StopEvent(None)), mode)
            for inst in instances]


def aggregate(outcomes: list[Outcome]) -> tuple[dict[str, MetricBlock], MetricBlock, MacroAverages]:
    """Per-group blocks (EN / ZH / NoiseSilence) plus pooled micro block and
    macro averages over the non-empty groups."""
    by_group: dict[str, list[Outcome]] = {}
    for o in outcomes:
        if o.language is None:
            raise ScoringError(f"outcome {o.instance_id!r} lacks a language tag")
        by_group.setdefault(group_of(o.language), []).append(o)

    blocks = {name: compute_block(by_group[name]) for name in GROUP_ORDER if name in by_group}
    micro = compute_block(outcomes)
    irls = [b.irl_s for b in blocks.values() if b.irl_s is not None]
    macro = MacroAverages(
        irl_s=sum(irls) / len(irls) if irls else None,
        fir=sum(b.fir for b in blocks.values()) / len(blocks),
        apt_s=sum(b.apt_s for b in blocks.values()) / len(blocks),
    )
    return blocks, micro, macro


def parse_stop_log(path) -> dict[str, StopEvent]:
    """Read a stop log: JSON-lines ``{"id": ..., "stop_time_s": <s> | "none"}``."""
    import json

    log: dict[str, StopEvent] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
                inst_id = rec["id"]
                stop = rec["stop_time_s"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ScoringError(f"stop log line {line_no}: malformed record ({e})") from None
            if inst_id in log:
                raise ScoringError(f"stop log line {line_no}: duplicate entry for id {inst_id!r}")
            if stop == "none" or stop is None:
                log[inst_id] = StopEvent(None)
            else:
                log[inst_id] = StopEvent(float(stop))
    return log
