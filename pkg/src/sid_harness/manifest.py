"""Benchmark manifest: on-disk format, loading, validation, corpus integrity.

A manifest is UTF-8 JSON-lines, one instance per line. An optional first
line ``{"type": "header", "expected_counts": {...}}`` declares the expected
corpus composition, which `validate_composition` checks against the loaded
instances. Audio paths are relative to the manifest's directory.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .audio import AudioFormatError, wav_info


class Language(str, Enum):
    ZH = "ZH"
    EN = "EN"
    NONE = "NONE"


class Category(str, Enum):
    INTERRUPT_BEGINNING = "InterruptBeginning"
    INTERRUPT_MIDDLE = "InterruptMiddle"
    UNINTERRUPTED = "Uninterrupted"
    NOISE = "Noise"
    SILENCE = "Silence"


#: Categories whose instances carry a ground-truth break time.
BREAK_CATEGORIES = frozenset({Category.INTERRUPT_BEGINNING, Category.INTERRUPT_MIDDLE})

#: Categories that live outside the language split.
NON_SPEECH_CATEGORIES = frozenset({Category.NOISE, Category.SILENCE})


class ManifestError(Exception):
    """Malformed or inconsistent manifest content. Carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class EvalInstance:
    """One benchmark case: an audio clip plus its ground truth."""

    id: str
    audio_path: Path
    language: Language
    category: Category
    turn_duration_s: float
    duration_s: float
    sample_rate_hz: int
    break_time_s: float | None = None
    text: str | None = None

    @property
    def has_break(self) -> bool:
        return self.break_time_s is not None


@dataclass
class CorpusSummary:
    counts: dict[tuple[Language, Category], int] = field(default_factory=dict)
    total: int = 0
    total_audio_s: float = 0.0


@dataclass(frozen=True)
class Discrepancy:
    bucket: tuple[Language, Category]
    expected: int
    actual: int


_INSTANCE_KEYS = {
    "id", "audio", "language", "category",
    "break_time_s", "turn_duration_s", "text", "sample_rate_hz",
}


def _validate_instance(inst: EvalInstance, line: int) -> None:
    if inst.break_time_s is not None and inst.category not in BREAK_CATEGORIES:
        raise ManifestError(
            f"instance {inst.id!r}: break_time_s forbidden for category {inst.category.value}", line)
    if inst.break_time_s is None and inst.category in BREAK_CATEGORIES:
        raise ManifestError(
            f"instance {inst.id!r}: break_time_s required for category {inst.category.value}", line)
    if inst.break_time_s is not None:
        if inst.break_time_s < 0:
            raise ManifestError(f"instance {inst.id!r}: negative break_time_s", line)
        if inst.break_time_s >= inst.duration_s:
            raise ManifestError(
                f"instance {inst.id!r}: break_time_s {inst.break_time_s} not within "
                f"audio duration {inst.duration_s}", line)
        if inst.break_time_s >= inst.turn_duration_s:
            raise ManifestError(
                f"instance {inst.id!r}: break_time_s {inst.break_time_s} not within "
                f"turn_duration_s {inst.turn_duration_s}", line)
    if inst.category in NON_SPEECH_CATEGORIES and inst.language is not Language.NONE:
        raise ManifestError(
            f"instance {inst.id!r}: category {inst.category.value} requires language NONE", line)
    if inst.category not in NON_SPEECH_CATEGORIES and inst.language is Language.NONE:
        raise ManifestError(
            f"instance {inst.id!r}: language NONE reserved for Noise/Silence", line)
    if inst.turn_duration_s <= 0:
        raise ManifestError(f"instance {inst.id!r}: turn_duration_s must be positive", line)


def _parse_record(rec: dict, base_dir: Path, line: int,
                  duration_cache: dict[Path, tuple[int, int]]) -> EvalInstance:
    unknown = set(rec) - _INSTANCE_KEYS - {"type"}
    if unknown:
        raise ManifestError(f"unknown fields {sorted(unknown)}", line)
    try:
        inst_id = rec["id"]
        audio = rec["audio"]
        language = Language(rec["language"])
        category = Category(rec["category"])
    except KeyError as e:
        raise ManifestError(f"missing field {e.args[0]!r}", line) from None
    except ValueError as e:
        raise ManifestError(str(e), line) from None

    audio_path = (base_dir / audio).resolve()
    if not audio_path.is_file():
        raise ManifestError(f"instance {inst_id!r}: audio file not found: {audio}", line)
    if audio_path not in duration_cache:
        try:
            duration_cache[audio_path] = wav_info(audio_path)
        except (AudioFormatError, wave.Error, EOFError) as e:
            raise ManifestError(f"instance {inst_id!r}: bad audio {audio}: {e}", line) from e
    n_samples, file_rate = duration_cache[audio_path]

    rate = rec.get("sample_rate_hz", file_rate)
    if rate != file_rate:
        raise ManifestError(
            f"instance {inst_id!r}: declared sample_rate_hz {rate} != file rate {file_rate}", line)
    duration_s = n_samples / file_rate
    turn_duration_s = rec.get("turn_duration_s")
    if turn_duration_s is None:
        turn_duration_s = duration_s

    inst = EvalInstance(
        id=inst_id,
        audio_path=audio_path,
        language=language,
        category=category,
        turn_duration_s=float(turn_duration_s),
        duration_s=duration_s,
        sample_rate_hz=file_rate,
        break_time_s=None if rec.get("break_time_s") is None else float(rec["break_time_s"]),
        text=rec.get("text"),
    )
    _validate_instance(inst, line)
    return inst


def _iter_records(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ManifestError(f"malformed record: {e}", line_no) from None
            if not isinstance(rec, dict):
                raise ManifestError("record is not an object", line_no)
            yield line_no, rec


def load_manifest(path: str | Path) -> list[EvalInstance]:
    """Load and validate all instances from a manifest file, in file order."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base_dir = path.parent
    instances: list[EvalInstance] = []
    seen: set[str] = set()
    cache: dict[Path, tuple[int, int]] = {}
    for line_no, rec in _iter_records(path):
        if rec.get("type") == "header":
            if line_no != 1:
                raise ManifestError("header record must be the first line", line_no)
            continue
        inst = _parse_record(rec, base_dir, line_no, cache)
        if inst.id in seen:
            raise ManifestError(f"duplicate id {inst.id!r}", line_no)
        seen.add(inst.id)
        instances.append(inst)
    return instances


def read_expected_composition(path: str | Path) -> CorpusSummary | None:
    """Parse the optional header record into an expected CorpusSummary."""
    path = Path(path)
    for line_no, rec in _iter_records(path):
        if rec.get("type") != "header":
            return None
        counts: dict[tuple[Language, Category], int] = {}
        for lang_key, by_cat in rec.get("expected_counts", {}).items():
            lang = Language(lang_key)
            for cat_key, n in by_cat.items():
                counts[(lang, Category(cat_key))] = int(n)
        return CorpusSummary(counts=counts, total=sum(counts.values()))
    return None


def summarize(instances: list[EvalInstance]) -> CorpusSummary:
    counts: dict[tuple[Language, Category], int] = {}
    total_audio = 0.0
    for inst in instances:
        key = (inst.language, inst.category)
        counts[key] = counts.get(key, 0) + 1
        total_audio += inst.duration_s
    return CorpusSummary(counts=counts, total=len(instances), total_audio_s=total_audio)


def validate_composition(summary: CorpusSummary, expected: CorpusSummary) -> list[Discrepancy]:
    """Bucket-wise comparison; empty result means the composition matches."""
    discrepancies = []
    for bucket in sorted(set(summary.counts) | set(expected.counts),
                         key=lambda b: (b[0].value, b[1].value)):
        actual = summary.counts.get(bucket, 0)
        exp = expected.counts.get(bucket, 0)
        if actual != exp:
            discrepancies.append(Discrepancy(bucket=bucket, expected=exp, actual=actual))
    return discrepancies
