"""WAV I/O helpers for the harness data layer.

Only mono 16-bit PCM RIFF files are accepted; anything else is rejected
rather than silently converted (no hidden DSP in the data layer).
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


class AudioFormatError(Exception):
    """Raised when a WAV file is not mono 16-bit PCM."""


def _check_format(wf: wave.Wave_read, path: Path) -> None:
    if wf.getnchannels() != 1:
        raise AudioFormatError(f"{path}: expected mono, got {wf.getnchannels()} channels")
    if wf.getsampwidth() != 2:
        raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
    if wf.getcomptype() != "NONE":
        raise AudioFormatError(f"{path}: compressed WAV not supported ({wf.getcomptype()})")


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a mono PCM16 WAV. Returns (int16 samples, sample rate)."""
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        _check_format(wf, path)
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2")
    return samples, rate


def wav_info(path: str | Path) -> tuple[int, int]:
    """Return (sample count, sample rate) from the header without decoding."""
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        _check_format(wf, path)
        return wf.getnframes(), wf.getframerate()


def wav_duration_s(path: str | Path) -> float:
    n, rate = wav_info(path)
    return n / rate


def write_wav(path: str | Path, samples: np.ndarray, rate: int) -> None:
    """Write int16 samples as a mono PCM16 WAV."""
    samples = np.asarray(samples, dtype="<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(samples.tobytes())
