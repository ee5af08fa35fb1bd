"""Detector contract, built-in baselines, and the external-detector host.

A detector consumes PCM16 chunks at its declared sample rate and returns
one boolean interrupt decision per chunk. Built-ins cover the harness's
self-test needs (always / never / ground-truth oracle) plus an energy VAD
baseline; real ML systems attach out-of-process over a newline-delimited
JSON protocol (subprocess pipes or TCP).
"""

from __future__ import annotations

import base64
import json
import math
import queue
import shlex
import socket
import subprocess
import threading
import uuid
from dataclasses import dataclass

import numpy as np

FULL_SCALE = 32767.0  # max 16-bit amplitude, 0 dBFS reference
PROTOCOL_VERSION = 1


class DetectorError(Exception):
    """Detector or protocol failure. ``code`` distinguishes failure classes."""

    def __init__(self, message: str, code: str = "detector_error"):
        self.code = code
        super().__init__(message)


class Detector:
    """Behavioral contract: reset() wipes session state; feed(chunk) returns
    exactly one decision per call."""

    sample_rate_hz: int = 16000

    def reset(self) -> None:
        raise NotImplementedError

    def feed(self, chunk: np.ndarray) -> bool:
        raise NotImplementedError

    def close(self) -> None:
        pass


class AlwaysInterrupt(Detector):
    def __init__(self, sample_rate_hz: int = 16000):
        self.sample_rate_hz = sample_rate_hz

    def reset(self) -> None:
        pass

    def feed(self, chunk: np.ndarray) -> bool:
        return True


class NeverInterrupt(Detector):
    def __init__(self, sample_rate_hz: int = 16000):
        self.sample_rate_hz = sample_rate_hz

    def reset(self) -> None:
        pass

    def feed(self, chunk: np.ndarray) -> bool:
        return False


class BreakOracle(Detector):
    """Ground-truth fixture: interrupts once cumulative audio time passes the
    planted break time. Always false when no break is set."""

    def __init__(self, break_time_s: float | None, sample_rate_hz: int = 16000):
        self.break_time_s = break_time_s
        self.sample_rate_hz = sample_rate_hz
        self._samples_seen = 0

    def reset(self) -> None:
        self._samples_seen = 0

    def feed(self, chunk: np.ndarray) -> bool:
        self._samples_seen += len(chunk)
        if self.break_time_s is None:
            return False
        return self._samples_seen / self.sample_rate_hz > self.break_time_s


@dataclass(frozen=True)
class EnergyVadParams:
    frame_ms: int = 25
    hop_ms: int = 10
    threshold_dbfs: float = -40.0
    min_speech_ms: int = 100
    hangover_ms: int = 0

    def __post_init__(self):
        if not (self.frame_ms >= self.hop_ms > 0):
            raise ValueError("require frame_ms >= hop_ms > 0")
        if self.min_speech_ms < self.hop_ms:
            raise ValueError("require min_speech_ms >= hop_ms")


def frame_rms_dbfs(frame: np.ndarray) -> float:
    """dBFS of the RMS amplitude of one frame (-inf for digital silence)."""
    sq = np.asarray(frame, dtype=np.float64) ** 2
    rms = math.sqrt(float(np.sum(sq)) / len(frame))
    if rms == 0.0:
        return -math.inf
    return 20.0 * math.log10(rms / FULL_SCALE)


class EnergyVad(Detector):
    """Latched energy VAD: triggers once a run of consecutive above-threshold
    frames covers at least min_speech_ms (run length counted as one hop per
    frame), then stays true until reset.

    Frames are computed on the cumulative stream, so decisions at time t
    depend only on audio up to t regardless of chunking.
    """

    def __init__(self, params: EnergyVadParams | None = None, sample_rate_hz: int = 16000):
        self.params = params or EnergyVadParams()
        self.sample_rate_hz = sample_rate_hz
        self._frame_len = self.params.frame_ms * sample_rate_hz // 1000
        self._hop_len = self.params.hop_ms * sample_rate_hz // 1000
        self._required_run = math.ceil(self.params.min_speech_ms / self.params.hop_ms)
        self._hangover_frames = self.params.hangover_ms // self.params.hop_ms
        self.reset()

    def reset(self) -> None:
        self._buf = np.empty(0, dtype=np.int16)
        self._run = 0
        self._gap = 0
        self._latched = False

    def feed(self, chunk: np.ndarray) -> bool:
        if self._latched:
            return True
        if len(chunk):
            self._buf = np.concatenate([self._buf, np.asarray(chunk, dtype=np.int16)])
        while len(self._buf) >= self._frame_len:
            frame = self._buf[:self._frame_len]
            self._buf = self._buf[self._hop_len:]
            if frame_rms_dbfs(frame) > self.params.threshold_dbfs:
                self._run += 1
                self._gap = 0
            elif self._run and self._gap < self._hangover_frames:
                self._gap += 1  # hangover: hold the run across short dips
            else:
                self._run = 0
                self._gap = 0
            if self._run >= self._required_run:
                self._latched = True
                break
        return self._latched


class _LineTransport:
    """Newline-delimited text transport with a background reader, so receives
    can time out uniformly across pipes and sockets."""

    def __init__(self, send, recv_file, on_close=None):
        self._send = send
        self._on_close = on_close
        self._queue: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, args=(recv_file,), daemon=True)
        self._reader.start()

    def _read_loop(self, fh) -> None:
        try:
            for line in fh:
                self._queue.put(line if isinstance(line, str) else line.decode("utf-8"))
        except (OSError, ValueError):
            pass
        self._queue.put(None)

    def send_line(self, text: str) -> None:
        try:
            self._send(text + "\n")
        except (OSError, BrokenPipeError) as e:
            raise DetectorError(f"peer connection lost: {e}", code="peer_closed") from e

    def recv_line(self, timeout_s: float) -> str:
        try:
            line = self._queue.get(timeout=timeout_s)
        except queue.Empty:
            raise DetectorError(f"no reply within {timeout_s:.1f}s", code="timeout") from None
        if line is None:
            raise DetectorError("peer closed the connection", code="peer_closed")
        return line

    def close(self) -> None:
        if self._on_close:
            self._on_close()


@dataclass(frozen=True)
class ExternalSpec:
    transport: str  # "subprocess" | "tcp"
    address_or_cmd: str
    timeout_ms: int = 2000


class ExternalDetector(Detector):
    """Host side of the detector wire protocol.

    One connection per detector instance; the handshake runs at attach time,
    before any session. Every chunk message must be answered by exactly one
    decision carrying the same sequence number.
    """

    def __init__(self, spec: ExternalSpec, sample_rate_hz: int = 16000,
                 chunk_ms: int = 100, feed_mode: str = "incremental"):
        self.spec = spec
        self.sample_rate_hz = sample_rate_hz
        self._timeout_s = spec.timeout_ms / 1000.0
        self._seq = 0
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None

        if spec.transport == "subprocess":
            try:
                self._proc = subprocess.Popen(
                    shlex.split(spec.address_or_cmd),
                    stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                    text=True, bufsize=1)
            except OSError as e:
                raise DetectorError(f"cannot spawn detector process: {e}", code="spawn_failed") from e
            self._transport = _LineTransport(
                self._write_proc, self._proc.stdout, on_close=self._close_proc)
        elif spec.transport == "tcp":
            host, _, port = spec.address_or_cmd.rpartition(":")
            try:
                self._sock = socket.create_connection((host, int(port)), timeout=self._timeout_s)
            except OSError as e:
                raise DetectorError(f"cannot connect to {spec.address_or_cmd}: {e}",
                                    code="connect_failed") from e
            self._transport = _LineTransport(
                self._write_sock, self._sock.makefile("r", encoding="utf-8"),
                on_close=self._close_sock)
        else:
            raise DetectorError(f"unknown transport {spec.transport!r}", code="bad_spec")

        self._handshake(chunk_ms, feed_mode)

    def _write_proc(self, text: str) -> None:
        assert self._proc and self._proc.stdin
        self._proc.stdin.write(text)
        self._proc.stdin.flush()

    def _write_sock(self, text: str) -> None:
        assert self._sock
        self._sock.sendall(text.encode("utf-8"))

    def _close_proc(self) -> None:
        if self._proc:
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def _close_sock(self) -> None:
        if self._sock:
            try:
                self._sock.close()
            except OSError:
                pass

    def _recv_msg(self, timeout_s: float | None = None) -> dict:
        line = self._transport.recv_line(timeout_s or self._timeout_s)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            raise DetectorError(f"malformed reply: {line!r}", code="malformed_reply") from e
        if not isinstance(msg, dict):
            raise DetectorError(f"malformed reply: {line!r}", code="malformed_reply")
        return msg

    def _handshake(self, chunk_ms: int, feed_mode: str) -> None:
        self._transport.send_line(json.dumps({
            "type": "hello", "version": PROTOCOL_VERSION,
            "sample_rate_hz": self.sample_rate_hz,
            "chunk_ms": chunk_ms, "feed_mode": feed_mode,
        }))
        try:
            reply = self._recv_msg()
        except DetectorError as e:
            if e.code == "timeout":
                raise DetectorError("handshake timeout", code="handshake_timeout") from None
            raise
        if reply.get("type") != "hello_ok":
            raise DetectorError(f"unexpected handshake reply: {reply}", code="handshake_failed")
        if reply.get("version") != PROTOCOL_VERSION:
            raise DetectorError(
                f"protocol version mismatch: peer {reply.get('version')}, "
                f"host {PROTOCOL_VERSION}", code="version_mismatch")

    def reset(self) -> None:
        self._seq = 0
        self._transport.send_line(json.dumps({"type": "reset", "session_id": uuid.uuid4().hex}))

    def feed(self, chunk: np.ndarray) -> bool:
        payload = base64.b64encode(np.asarray(chunk, dtype="<i2").tobytes()).decode("ascii")
        seq = self._seq
        self._seq += 1
        self._transport.send_line(json.dumps({"type": "chunk", "seq": seq, "pcm16le_b64": payload}))
        try:
            reply = self._recv_msg()
        except DetectorError as e:
            if e.code == "timeout":
                raise DetectorError(f"no decision for seq {seq} within timeout",
                                    code="decision_timeout") from None
            raise
        if reply.get("type") != "decision":
            raise DetectorError(f"expected decision, got {reply}", code="malformed_reply")
        if reply.get("seq") != seq:
            raise DetectorError(f"out-of-order decision: expected seq {seq}, got {reply.get('seq')}",
                                code="out_of_order")
        interrupt = reply.get("interrupt")
        if not isinstance(interrupt, bool):
            raise DetectorError(f"non-boolean decision: {reply}", code="malformed_reply")
        return interrupt

    def close(self) -> None:
        try:
            self._transport.send_line(json.dumps({"type": "bye"}))
        except DetectorError:
            pass
        self._transport.close()


BUILTIN_DETECTORS = ("always", "never", "oracle", "energy")


def make_builtin(name: str, instance=None, sample_rate_hz: int = 16000,
                 energy_params: EnergyVadParams | None = None) -> Detector:
    """Instantiate a built-in detector by name; the oracle binds to the
    instance's break time."""
    if name == "always":
        return AlwaysInterrupt(sample_rate_hz)
    if name == "never":
        return NeverInterrupt(sample_rate_hz)
    if name == "oracle":
        break_time = instance.break_time_s if instance is not None else None
        return BreakOracle(break_time, sample_rate_hz)
    if name == "energy":
        return EnergyVad(energy_params, sample_rate_hz)
    raise DetectorError(f"unknown built-in detector {name!r}", code="bad_spec")
