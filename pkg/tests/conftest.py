import json
import math
from pathlib import Path

import numpy as np
import pytest

from sid_harness.audio import write_wav


def silence(duration_s: float, rate: int = 16000) -> np.ndarray:
    return np.zeros(int(duration_s * rate), dtype=np.int16)


def sine(duration_s: float, freq_hz: float = 440.0, amplitude: float = 32767.0,
         rate: int = 16000) -> np.ndarray:
    t = np.arange(int(duration_s * rate)) / rate
    return np.round(amplitude * np.sin(2 * math.pi * freq_hz * t)).astype(np.int16)


def white_noise(duration_s: float, rms_dbfs: float, rate: int = 16000,
                seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rms = 32767.0 * 10 ** (rms_dbfs / 20.0)
    x = rng.normal(0.0, rms, size=int(duration_s * rate))
    return np.clip(np.round(x), -32768, 32767).astype(np.int16)


def write_manifest(dir_path: Path, records: list[dict], header: dict | None = None,
                   name: str = "manifest.jsonl") -> Path:
    path = dir_path / name
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"type": "header", **header}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


@pytest.fixture
def make_instance_dir(tmp_path):
    """Build a manifest directory with generated WAVs.

    Callers pass specs: dicts with keys id, category, language, optional
    break_time_s / turn_duration_s, samples (ndarray) or duration_s.
    """
    def build(specs: list[dict], header: dict | None = None) -> Path:
        records = []
        for spec in specs:
            samples = spec.get("samples")
            if samples is None:
                samples = silence(spec.get("duration_s", 5.0))
            wav_name = f"{spec['id']}.wav"
            write_wav(tmp_path / wav_name, samples, spec.get("rate", 16000))
            rec = {"id": spec["id"], "audio": wav_name,
                   "language": spec.get("language", "EN"),
                   "category": spec.get("category", "Uninterrupted")}
            for key in ("break_time_s", "turn_duration_s", "text", "sample_rate_hz"):
                if key in spec:
                    rec[key] = spec[key]
            records.append(rec)
        return write_manifest(tmp_path, records, header=header)
    return build
