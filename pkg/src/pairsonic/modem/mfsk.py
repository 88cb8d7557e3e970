"""Two-bank 16-tone MFSK: one byte per symbol, high nibble on bank 0."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import TONES_PER_BANK, ModemConfig
from .errors import RateMismatch
from .framing import FrameError, build_frame, frame_length, parse_frame

log = logging.getLogger(__name__)

# preamble alternates bank-index pairs (0, 15) and (15, 0)
PREAMBLE_PAIRS = ((0, 15), (15, 0))
SYNC_RATIO = 4.0  # 6 dB, in power
FLOOR_AMPLITUDE = 1e-3


@dataclass(frozen=True)
class PcmBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=np.float32)
        if s.ndim != 1:
            raise ValueError("PCM buffers are mono")
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PcmBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)

    def __add__(self, other: PcmBuffer) -> PcmBuffer:
        if self.sample_rate != other.sample_rate:
            raise RateMismatch("cannot join buffers with different sample rates")
        return PcmBuffer(np.concatenate([self.samples, other.samples]), self.sample_rate)

    @classmethod
    def silence(cls, seconds: float, sample_rate: int) -> PcmBuffer:
        return cls(np.zeros(int(round(seconds * sample_rate)), dtype=np.float32), sample_rate)


@functools.lru_cache(maxsize=16)
def _tone_table(config: ModemConfig) -> np.ndarray:
    """Ramped single-symbol waveforms for all 32 tones, shape (32, N)."""
    n = config.symbol_samples
    r = config.ramp_samples
    env = np.ones(n)
    if r:
        ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(r) + 0.5) / r))
        env[:r] = ramp
        env[n - r :] = ramp[::-1]
    t = np.arange(n) / config.sample_rate
    freqs = np.asarray(config.all_tones())
    table = (config.amplitude / 2.0) * np.sin(2.0 * np.pi * np.outer(freqs, t)) * env
    table.setflags(write=False)
    return table


def _symbols_for(config: ModemConfig, payload: bytes) -> np.ndarray:
    pre = [PREAMBLE_PAIRS[k % 2] for k in range(config.preamble_symbols)]
    frame = build_frame(payload, config.rs_parity_bytes)
    pairs = pre + [(b >> 4, b & 0x0F) for b in frame]
    return np.asarray(pairs, dtype=np.int64)


def modulate(config: ModemConfig, payload: bytes) -> PcmBuffer:
    table = _tone_table(config)
    pairs = _symbols_for(config, bytes(payload))
    sig = table[pairs[:, 0]] + table[TONES_PER_BANK + pairs[:, 1]]
    return PcmBuffer(sig.reshape(-1).astype(np.float32), config.sample_rate)


@dataclass
class DecodedFrame:
    payload: bytes
    start_sample: int
    corrected_bytes: int = 0


@dataclass
class DecodeReport:
    frames: list[DecodedFrame] = field(default_factory=list)
    sync_hits: list[int] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rs_failures(self) -> int:
        return sum(1 for _, kind in self.failures if kind == "rs")

    @property
    def crc_failures(self) -> int:
        return sum(1 for _, kind in self.failures if kind == "crc")


class _Scanner:
    def __init__(self, config: ModemConfig, x: np.ndarray):
        self.cfg = config
        self.x = x
        self.n = config.symbol_samples
        self.hop = max(1, self.n // 2)
        self.fs = float(config.sample_rate)
        self.k = config.preamble_symbols
        self.tones = np.asarray(config.all_tones())
        # marker columns: 0=(bank0,0) 1=(bank0,15) 2=(bank1,0) 3=(bank1,15)
        self.markers = np.asarray(
            [config.tone_frequency(0, 0), config.tone_frequency(0, 15),
             config.tone_frequency(1, 0), config.tone_frequency(1, 15)]
        )
        self.floor = (FLOOR_AMPLITUDE * self.n / 2.0) ** 2

    def _expected_cols(self, k: int) -> tuple[list[int], list[int]]:
        return ([0, 3], [1, 2]) if k % 2 == 0 else ([1, 2], [0, 3])

    def coarse(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        last = self.x.size - (self.k + 1) * self.n
        if last < 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool), np.zeros(0)
        starts = np.arange(0, self.x.size - self.n + 1, self.hop, dtype=np.int64)
        energy = kernels.tone_energies(self.x, starts, self.n, self.markers, self.fs)
        q = int(round(self.n / self.hop))
        ncand = int(np.searchsorted(starts, last, side="right"))
        ok = np.ones(ncand, dtype=bool)
        score = np.zeros(ncand)
        for k in range(self.k):
            ek = energy[k * q : k * q + ncand]
            good, bad = self._expected_cols(k)
            exp = ek[:, good]
            ok &= exp.min(axis=1) > self.floor
            ok &= exp.min(axis=1) >= SYNC_RATIO * ek[:, bad].max(axis=1)
            score += exp.sum(axis=1)
        return starts[:ncand], ok, score

    def preamble_score(self, offsets: np.ndarray) -> np.ndarray:
        starts = (offsets[:, None] + self.n * np.arange(self.k)[None, :]).reshape(-1)
        e = kernels.tone_energies(self.x, starts, self.n, self.markers, self.fs)
        e = e.reshape(offsets.size, self.k, 4)
        total = np.zeros(offsets.size)
        for k in range(self.k):
            good, _ = self._expected_cols(k)
            total += e[:, k, good].sum(axis=1)
        return total

    def passes_band_median(self, t: int) -> bool:
        starts = t + self.n * np.arange(self.k)
        e = kernels.tone_energies(self.x, starts, self.n, self.tones, self.fs)
        for k in range(self.k):
            good = [TONES_PER_BANK - 1, TONES_PER_BANK] if k % 2 else [0, 2 * TONES_PER_BANK - 1]
            if e[k, good].min() < SYNC_RATIO * np.median(e[k]):
                return False
        return True

    def refine(self, t0: int) -> int:
        hi = self.x.size - (self.k + 1) * self.n
        best = t0
        step = max(1, self.hop // 8)
        span = self.hop
        while True:
            offs = np.arange(best - span, best + span + 1, step, dtype=np.int64)
            offs = offs[(offs >= 0) & (offs <= hi)]
            if offs.size == 0:
                return best
            best = int(offs[np.argmax(self.preamble_score(offs))])
            if step == 1:
                return best
            span, step = step, max(1, step // 8)

    def read_bytes(self, start: int, count: int) -> bytes:
        starts = start + self.n * np.arange(count, dtype=np.int64)
        e = kernels.tone_energies(self.x, starts, self.n, self.tones, self.fs)
        hi = np.argmax(e[:, :TONES_PER_BANK], axis=1)
        lo = np.argmax(e[:, TONES_PER_BANK:], axis=1)
        return bytes(((hi << 4) | lo).astype(np.uint8).tolist())


def decode_report(config: ModemConfig, pcm: PcmBuffer) -> DecodeReport:
    """Scan a buffer for frames, recording sync hits and decode failures."""
    if pcm.sample_rate != config.sample_rate:
        raise RateMismatch(f"buffer is {pcm.sample_rate} Hz, modem expects {config.sample_rate} Hz")
    report = DecodeReport()
    # one symbol of trailing zeros so a frame flush with the end still decodes
    # when sync lands a few samples late
    x = np.concatenate([np.asarray(pcm.samples, dtype=np.float64), np.zeros(config.symbol_samples)])
    sc = _Scanner(config, x)
    starts, ok, score = sc.coarse()
    parity = config.rs_parity_bytes
    resume = 0
    i = 0
    while i < starts.size:
        if not ok[i] or starts[i] < resume:
            i += 1
            continue
        cluster = np.arange(i, min(i + 2, starts.size))
        cluster = cluster[ok[cluster]]
        c = int(cluster[np.argmax(score[cluster])])
        if not sc.passes_band_median(int(starts[c])):
            i = c + 1
            continue
        t = sc.refine(int(starts[c]))
        report.sync_hits.append(t)
        data_start = t + sc.k * sc.n
        length = sc.read_bytes(data_start, 1)[0]
        total = frame_length(length, parity) if length else 0
        if length == 0 or data_start + total * sc.n > sc.x.size:
            report.failures.append((t, "length"))
            i = c + 1
            continue
        frame = sc.read_bytes(data_start, total)
        try:
            payload, fixed = parse_frame(frame, parity)
        except FrameError as exc:
            log.debug("frame at sample %d rejected: %s", t, exc)
            report.failures.append((t, exc.kind))
            i = c + 1
            continue
        report.frames.append(DecodedFrame(payload, t, fixed))
        resume = data_start + total * sc.n
        i = int(np.searchsorted(starts, resume))
    return report


def demodulate(config: ModemConfig, pcm: PcmBuffer) -> list[tuple[bytes, int]]:
    return [(f.payload, f.start_sample) for f in decode_report(config, pcm).frames]
