from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import IndexOutOfRange

BAND_WIDTH_HZ = 4500.0
TONES_PER_BANK = 16
BANKS = 2


class Band(enum.Enum):
    AUDIBLE = (1875.0, 6375.0)
    ULTRASONIC = (15000.0, 19500.0)

    @property
    def low(self) -> float:
        return self.value[0]

    @property
    def high(self) -> float:
        return self.value[1]

    @classmethod
    def parse(cls, name: str) -> Band:
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown band {name!r} (audible or ultrasonic)") from None


@dataclass(frozen=True)
class ModemConfig:
    sample_rate: int = 48000
    band: Band = Band.AUDIBLE
    symbol_duration_ms: float = 64.0
    rs_parity_bytes: int = 8
    preamble_symbols: int = 4
    amplitude: float = 0.5
    ramp_ms: float = 2.0

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        if self.rs_parity_bytes % 2 or not 2 <= self.rs_parity_bytes <= 32:
            raise ValueError("rs_parity_bytes must be even and in [2, 32]")
        if not 0.0 < self.amplitude <= 1.0:
            raise ValueError("amplitude must be in (0, 1]")
        if self.preamble_symbols < 2:
            raise ValueError("preamble needs at least two symbols")
        if self.sample_rate / self.symbol_samples > self.tone_spacing:
            raise ValueError("symbol too short to resolve adjacent tones")
        if self.band.high >= self.sample_rate / 2:
            raise ValueError("band exceeds the Nyquist frequency")
        if 2 * self.ramp_samples >= self.symbol_samples:
            raise ValueError("ramps longer than the symbol")

    @property
    def tone_spacing(self) -> float:
        return BAND_WIDTH_HZ / (BANKS * TONES_PER_BANK)

    @property
    def symbol_samples(self) -> int:
        return int(round(self.symbol_duration_ms * self.sample_rate / 1000.0))

    @property
    def ramp_samples(self) -> int:
        return int(round(self.ramp_ms * self.sample_rate / 1000.0))

    def tone_frequency(self, bank: int, index: int) -> float:
        """Centre of sub-band ``bank * 16 + index`` of the 32 equal sub-bands.

        Centring (rather than placing tone 0 on the band edge) keeps the
        spectral skirt of the lowest tone inside the band.
        """
        if bank not in (0, 1) or not 0 <= index < TONES_PER_BANK:
            raise IndexOutOfRange(f"no tone at bank {bank}, index {index}")
        return self.band.low + (bank * TONES_PER_BANK + index + 0.5) * self.tone_spacing

    def all_tones(self) -> list[float]:
        return [self.tone_frequency(b, i) for b in range(BANKS) for i in range(TONES_PER_BANK)]

    def frame_symbols(self, payload_len: int) -> int:
        """Symbols on air for a payload, preamble included."""
        return self.preamble_symbols + 1 + payload_len + 4 + self.rs_parity_bytes

    def airtime(self, payload_len: int) -> float:
        return self.frame_symbols(payload_len) * self.symbol_duration_ms / 1000.0


def tone_frequency(config: ModemConfig, bank: int, index: int) -> float:
    return config.tone_frequency(bank, index)
