"""Training-clip generation by randomized temporal cropping.

Clips are prefixes of the source utterance. Endpoints are drawn uniformly
from [min_clip_s, duration] by ``random.Random(seed)`` (one ``uniform``
call per clip, in order). When a shifted break time B' lies inside the
clip range, draws 0 and 1 are overridden (unless draws 2..n-1 already
cover the slot) so at least one endpoint lands in [B'-delta, B'] and one
in (B', B'+delta] — the boundary-aware sampling guarantee. A clip is labeled Y exactly when its
endpoint exceeds B'. This procedure is fixed so seeded fixtures stay valid.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .annotation import WordAlignment, apply_intent_delay
from .audio import read_wav, write_wav
from .manifest import EvalInstance

log = logging.getLogger("sid_harness.cropgen")


class ClipLabel(str, Enum):
    Y = "Y"  # endpoint after the (shifted) break: interrupt
    N = "N"


class CropError(Exception):
    pass


@dataclass(frozen=True)
class CropConfig:
    n_clips_per_utt: int = 6
    min_clip_s: float = 0.5
    boundary_window_s: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_clips_per_utt < 1:
            raise ValueError("n_clips_per_utt must be >= 1")
        if self.min_clip_s <= 0:
            raise ValueError("min_clip_s must be positive")


@dataclass(frozen=True)
class ClipSample:
    source_id: str
    start_s: float
    end_s: float
    label: ClipLabel


def shifted_break(break_time_s: float | None,
                  alignments: list[WordAlignment] | None) -> float | None:
    """Intent-confirmation shift of the break time (one word later)."""
    if break_time_s is None:
        return None
    if not alignments:
        raise CropError("word alignments required to shift the break time")
    return apply_intent_delay(break_time_s, alignments)


def generate_clips(instance: EvalInstance, alignments: list[WordAlignment] | None,
                   config: CropConfig) -> list[ClipSample]:
    """Sample n prefix clips with labels against the shifted break time."""
    duration = instance.duration_s
    if duration < config.min_clip_s:
        raise CropError(
            f"instance {instance.id!r}: duration {duration:.3f}s below min clip "
            f"length {config.min_clip_s}s")

    b_shift = shifted_break(instance.break_time_s, alignments)
    if b_shift is not None and config.n_clips_per_utt < 2:
        raise CropError("need n_clips_per_utt >= 2 to bracket the break boundary")

    rng = random.Random(config.seed)
    ends = [rng.uniform(config.min_clip_s, duration) for _ in range(config.n_clips_per_utt)]

    if b_shift is not None and b_shift < duration:
        delta = config.boundary_window_s
        pre_lo, pre_hi = max(config.min_clip_s, b_shift - delta), b_shift
        post_lo, post_hi = b_shift, min(duration, b_shift + delta)

        def draw_post() -> float:
            # Post slot is open at B': redraw the measure-zero boundary hit.
            e = rng.uniform(post_lo, post_hi)
            while e <= post_lo:
                e = rng.uniform(post_lo, post_hi)
            return e

        # Boundary slots are guaranteed by draws 0 and 1; draws from index 2
        # on count toward the slots only if they land there by chance.
        if b_shift <= config.min_clip_s:
            # Pre-break slot infeasible: both guaranteed clips go after the break.
            log.warning("instance %s: shifted break %.3fs <= min clip length; "
                        "placing both boundary clips post-break", instance.id, b_shift)
            n_post_rest = sum(1 for e in ends[2:] if post_lo < e <= post_hi)
            if n_post_rest < 2:
                ends[0] = draw_post()
            if n_post_rest < 1:
                ends[1] = draw_post()
        else:
            if not any(pre_lo <= e <= pre_hi for e in ends[2:]):
                ends[0] = rng.uniform(pre_lo, pre_hi)
            if not any(post_lo < e <= post_hi for e in ends[2:]):
                ends[1] = draw_post()

    # Uniform draws collide with probability ~0; redraw deterministically if they do.
    seen: set[float] = set()
    for i, e in enumerate(ends):
        while e in seen:
            e = rng.uniform(config.min_clip_s, duration)
        seen.add(e)
        ends[i] = e

    def label(end: float) -> ClipLabel:
        return ClipLabel.Y if (b_shift is not None and end > b_shift) else ClipLabel.N

    return [ClipSample(source_id=instance.id, start_s=0.0, end_s=e, label=label(e))
            for e in ends]


def export_clips(clips: list[ClipSample], out_dir: str | Path,
                 sources: dict[str, EvalInstance] | None = None,
                 emit_audio: bool = False) -> Path:
    """Write the clip manifest (JSON-lines) and optionally the sliced WAVs.

    Slices are sample-exact: [floor(start * rate), floor(end * rate)).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "clips.jsonl"

    audio_cache: dict[str, tuple] = {}
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for i, clip in enumerate(clips):
            fh.write(json.dumps({"source_id": clip.source_id, "start_s": clip.start_s,
                                 "end_s": clip.end_s, "label": clip.label.value}) + "\n")
            if emit_audio:
                if sources is None or clip.source_id not in sources:
                    raise CropError(f"no source instance for clip of {clip.source_id!r}")
                inst = sources[clip.source_id]
                if clip.source_id not in audio_cache:
                    audio_cache[clip.source_id] = read_wav(inst.audio_path)
                samples, rate = audio_cache[clip.source_id]
                lo = int(clip.start_s * rate)
                hi = int(clip.end_s * rate)
                if hi > len(samples) or lo < 0 or lo >= hi:
                    raise CropError(
                        f"clip [{clip.start_s}, {clip.end_s}] outside source bounds "
                        f"of {clip.source_id!r}")
                write_wav(out_dir / f"{clip.source_id}_{i:04d}.wav", samples[lo:hi], rate)
    return manifest_path
