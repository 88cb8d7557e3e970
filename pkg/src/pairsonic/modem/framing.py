"""Frame layout: ``len | payload | crc32 | rs parity``, one byte per symbol."""

from __future__ import annotations

import struct
import zlib

from . import kernels
from .errors import ModemError, PayloadTooLarge, UncorrectableError

MAX_PAYLOAD = 192
CRC_SIZE = 4


class FrameError(ModemError):
    """A received frame failed RS correction or CRC validation."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def crc32(data: bytes) -> bytes:
    """IEEE 802.3 CRC-32 (reflected, init and final xor 0xFFFFFFFF), big-endian."""
    return struct.pack(">I", zlib.crc32(data) & 0xFFFFFFFF)


def rs_encode(data: bytes, parity_count: int) -> bytes:
    return kernels.rs_encode(bytes(data), parity_count)


def rs_decode(data_with_parity: bytes, parity_count: int) -> bytes:
    """Return the corrected data part; raises UncorrectableError."""
    data, _ = kernels.rs_decode(bytes(data_with_parity), parity_count)
    return data


def build_frame(payload: bytes, parity_count: int) -> bytes:
    if not 1 <= len(payload) <= MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload must be 1-{MAX_PAYLOAD} bytes, got {len(payload)}")
    body = bytes([len(payload)]) + bytes(payload)
    body += crc32(body)
    return body + rs_encode(body, parity_count)


def frame_length(payload_len: int, parity_count: int) -> int:
    return 1 + payload_len + CRC_SIZE + parity_count


def parse_frame(frame: bytes, parity_count: int) -> tuple[bytes, int]:
    """Correct and validate a received frame; returns (payload, bytes fixed)."""
    try:
        body, fixed = kernels.rs_decode(bytes(frame), parity_count)
    except UncorrectableError as exc:
        raise FrameError("rs", str(exc)) from None
    n = body[0]
    if n == 0 or n + 1 + CRC_SIZE != len(body):
        raise FrameError("length", f"corrected length byte {n} disagrees with block size")
    if crc32(body[:-CRC_SIZE]) != body[-CRC_SIZE:]:
        raise FrameError("crc", "CRC mismatch")
    return body[1:-CRC_SIZE], fixed
