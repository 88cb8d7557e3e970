"""Acoustic out-of-band modem: MFSK over the audible or near-ultrasonic band."""

from .channel import AWGN, DcOffset, Gain, Pad, impair, wav_read, wav_write
from .config import Band, ModemConfig, tone_frequency
from .errors import (
    IndexOutOfRange,
    ModemError,
    PayloadTooLarge,
    RateMismatch,
    UncorrectableError,
    UnsupportedWav,
)
from .framing import MAX_PAYLOAD, crc32, rs_decode, rs_encode
from .kernels import BACKEND
from .mfsk import DecodeReport, PcmBuffer, decode_report, demodulate, modulate

__all__ = [
    "AWGN",
    "BACKEND",
    "Band",
    "DcOffset",
    "DecodeReport",
    "Gain",
    "IndexOutOfRange",
    "MAX_PAYLOAD",
    "ModemConfig",
    "ModemError",
    "Pad",
    "PayloadTooLarge",
    "PcmBuffer",
    "RateMismatch",
    "UncorrectableError",
    "UnsupportedWav",
    "crc32",
    "decode_report",
    "demodulate",
    "impair",
    "modulate",
    "rs_decode",
    "rs_encode",
    "tone_frequency",
    "wav_read",
    "wav_write",
]
