"""Chunked session replay with K-consecutive decision smoothing.

One session replays an instance's audio as fixed-length chunks against a
detector. A stop is registered at the end of the chunk whose decision
completes a run of K consecutive interrupts; no further chunks are fed
after that. Time is logical audio time by default; realtime mode paces
chunks by wall clock and adds the measured decision latency to the stop.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .audio import read_wav
from .detectors import Detector, DetectorError
from .manifest import EvalInstance
from .metrics import StopEvent


class FeedMode(str, Enum):
    INCREMENTAL = "Incremental"
    CUMULATIVE = "Cumulative"


@dataclass(frozen=True)
class SessionConfig:
    chunk_ms: int = 100
    k_consecutive: int = 3
    realtime: bool = False
    feed_mode: FeedMode = FeedMode.INCREMENTAL

    def __post_init__(self):
        if not (10 <= self.chunk_ms <= 1000):
            raise ValueError(f"chunk_ms {self.chunk_ms} outside [10, 1000]")
        if self.k_consecutive < 1:
            raise ValueError("k_consecutive must be >= 1")


@dataclass(frozen=True)
class ChunkDecision:
    chunk_index: int
    chunk_end_s: float
    interrupt: bool


@dataclass
class SessionTrace:
    instance_id: str
    decisions: list[ChunkDecision] = field(default_factory=list)
    stop: StopEvent = StopEvent(None)
    error: str | None = None
    error_code: str | None = None
    wall_latencies_ms: list[float] | None = None

    @property
    def errored(self) -> bool:
        return self.error is not None


def smooth(decisions: list[bool], k: int) -> int | None:
    """Index of the first decision completing k consecutive trues; None if
    no such run exists."""
    if k < 1:
        raise ValueError("k must be >= 1")
    run = 0
    for i, d in enumerate(decisions):
        run = run + 1 if d else 0
        if run >= k:
            return i
    return None


def run_session(instance: EvalInstance, detector: Detector,
                config: SessionConfig = SessionConfig()) -> SessionTrace:
    """Replay one instance against a detector, stopping at the first K-run."""
    trace = SessionTrace(instance_id=instance.id)
    if detector.sample_rate_hz != instance.sample_rate_hz:
        trace.error = (f"sample rate mismatch: detector {detector.sample_rate_hz} Hz, "
                       f"instance {instance.sample_rate_hz} Hz")
        trace.error_code = "rate_mismatch"
        return trace

    samples, rate = read_wav(instance.audio_path)
    chunk_len = config.chunk_ms * rate // 1000
    duration_s = len(samples) / rate
    if config.realtime:
        trace.wall_latencies_ms = []

    try:
        detector.reset()
    except DetectorError as e:
        trace.error, trace.error_code = str(e), e.code
        return trace

    run = 0
    n_chunks = -(-len(samples) // chunk_len)
    session_start = time.monotonic()
    for idx in range(n_chunks):
        chunk = samples[idx * chunk_len:(idx + 1) * chunk_len]
        chunk_end_s = min((idx + 1) * config.chunk_ms / 1000.0, duration_s)
        if config.feed_mode is FeedMode.CUMULATIVE:
            # Prefix-replay: the detector sees the whole context each step.
            feed_data = samples[:(idx + 1) * chunk_len]
        else:
            feed_data = chunk

        if config.realtime:
            target = session_start + chunk_end_s
            now = time.monotonic()
            if target > now:
                time.sleep(target - now)

        t0 = time.monotonic()
        try:
            if config.feed_mode is FeedMode.CUMULATIVE:
                detector.reset()
            interrupt = detector.feed(np.asarray(feed_data))
        except DetectorError as e:
            trace.error, trace.error_code = str(e), e.code
            return trace
        latency_s = time.monotonic() - t0
        if trace.wall_latencies_ms is not None:
            trace.wall_latencies_ms.append(latency_s * 1000.0)

        trace.decisions.append(ChunkDecision(idx, chunk_end_s, interrupt))
        run = run + 1 if interrupt else 0
        if run >= config.k_consecutive:
            stop_s = chunk_end_s
            if config.realtime:
                stop_s += latency_s
            trace.stop = StopEvent(stop_s)
            break
    return trace


DetectorFactory = Callable[[EvalInstance], Detector]


def run_suite(instances: list[EvalInstance], detector_factory: DetectorFactory,
              config: SessionConfig = SessionConfig(),
              parallelism: int = 1) -> list[tuple[str, SessionTrace]]:
    """Run one session per instance. Each session gets its own detector from
    the factory, so results are independent of parallelism. Per-session
    detector failures are recorded on the trace, never raised."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(instance: EvalInstance) -> tuple[str, SessionTrace]:
        try:
            detector = detector_factory(instance)
        except DetectorError as e:
            trace = SessionTrace(instance_id=instance.id, error=str(e), error_code=e.code)
            return instance.id, trace
        try:
            return instance.id, run_session(instance, detector, config)
        finally:
            detector.close()

    if parallelism == 1 or len(instances) <= 1:
        return [one(inst) for inst in instances]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, instances))


def dump_trace_lines(traces: list[tuple[str, SessionTrace]]):
    """Per-chunk debug records, JSON-lines."""
    import json

    for instance_id, trace in traces:
        for d in trace.decisions:
            yield json.dumps({"instance_id": instance_id, "chunk_index": d.chunk_index,
                              "chunk_end_s": d.chunk_end_s, "interrupt": d.interrupt})
