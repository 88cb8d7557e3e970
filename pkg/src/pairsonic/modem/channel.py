"""Channel impairments and WAV file I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import UnsupportedWav
from .mfsk import PcmBuffer

INT16_SCALE = 32767.0


@dataclass(frozen=True)
class AWGN:
    snr_db: float


@dataclass(frozen=True)
class Gain:
    factor: float


@dataclass(frozen=True)
class DcOffset:
    value: float


@dataclass(frozen=True)
class Pad:
    """Random leading/trailing silence, each uniform in [0, max] seconds."""

    max_lead: float = 1.0
    max_trail: float = 1.0


Impairment = Union[AWGN, Gain, DcOffset, Pad]


def impair(pcm: PcmBuffer, impairments: Sequence[Impairment], seed: int = 0) -> PcmBuffer:
    rng = np.random.default_rng(seed)
    x = np.asarray(pcm.samples, dtype=np.float64)
    for imp in impairments:
        if isinstance(imp, AWGN):
            power = float(np.mean(x * x)) if x.size else 0.0
            if power > 0.0:
                sigma = np.sqrt(power / 10.0 ** (imp.snr_db / 10.0))
                x = x + rng.normal(0.0, sigma, x.size)
        elif isinstance(imp, Gain):
            x = x * imp.factor
        elif isinstance(imp, DcOffset):
            x = x + imp.value
        elif isinstance(imp, Pad):
            lead = int(rng.uniform(0.0, imp.max_lead) * pcm.sample_rate)
            trail = int(rng.uniform(0.0, imp.max_trail) * pcm.sample_rate)
            x = np.concatenate([np.zeros(lead), x, np.zeros(trail)])
        else:
            raise TypeError(f"unknown impairment {imp!r}")
    return PcmBuffer(np.clip(x, -1.0, 1.0).astype(np.float32), pcm.sample_rate)


def wav_write(path: str | Path, pcm: PcmBuffer) -> None:
    q = np.round(np.clip(pcm.samples.astype(np.float64), -1.0, 1.0) * INT16_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(pcm.sample_rate))
        w.writeframes(q.tobytes())


def wav_read(path: str | Path) -> PcmBuffer:
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            nframes = w.getnframes()
            raw = w.readframes(nframes)
    except (wave.Error, EOFError) as exc:
        raise UnsupportedWav(f"{path}: {exc}") from None
    if channels != 1:
        raise UnsupportedWav(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise UnsupportedWav(f"{path}: expected 16-bit samples, got {8 * width}-bit")
    if len(raw) != 2 * nframes:
        raise UnsupportedWav(f"{path}: truncated data chunk")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / INT16_SCALE
    return PcmBuffer(np.clip(data, -1.0, 1.0).astype(np.float32), rate)
