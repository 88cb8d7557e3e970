"""Canonical byte encodings, hashing and nested commitments.

Everything in this module is a pure function over bytes.  The layouts here
are the frozen interop surface: contact cards ("PC" v1), the in-band message
framing, and the out-of-band payloads carried by the acoustic modem.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

DIGEST_SIZE = 32
NONCE_SIZE = 32
SESSION_ID_SIZE = 8
PUBLIC_KEY_SIZE = 32
PROTOCOL_VERSION = 1
MIN_GROUP_SIZE = 2
MAX_GROUP_SIZE = 16
MIN_OOB_DIGEST = 16

CARD_MAGIC = b"PC"
CARD_VERSION = 0x01
INNER_MAGIC = b"PSIN"
INNER_VERSION = 0x01
AGGREGATE_TAG = b"PSAG"
AGGREGATE_VERSION = 0x01

MAX_NAME_BYTES = 64
MAX_EXTENSIONS = 16
MAX_EXT_KEY = 32
MAX_EXT_VALUE = 1024
MAX_DESCRIPTOR = 64


class WireError(ValueError):
    """Base class for encoding and verification failures."""


class InvalidCard(WireError):
    pass


class MalformedCard(WireError):
    pass


class CommitmentMismatch(WireError):
    pass


class MalformedInner(WireError):
    pass


class SizeMismatch(WireError):
    pass


class DuplicateCommitment(WireError):
    pass


class MalformedMessage(WireError):
    pass


class MalformedOob(WireError):
    pass


class AbortReason(enum.IntEnum):
    USER_DECLINED = 0x01
    OOB_MISMATCH = 0x02
    TIMEOUT = 0x03
    INTEGRITY_FAILURE = 0x04

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


# --------------------------------------------------------------------------
# contact cards


@dataclass(frozen=True)
class ContactCard:
    """A user's identity payload.

    Extensions may be given in any order; they are stored sorted by key so
    that equal cards always compare (and encode) equal.
    """

    name: str
    public_key: bytes
    extensions: tuple[tuple[bytes, bytes], ...] = ()

    def __post_init__(self) -> None:
        exts = tuple(sorted((bytes(k), bytes(v)) for k, v in self.extensions))
        object.__setattr__(self, "public_key", bytes(self.public_key))
        object.__setattr__(self, "extensions", exts)
        _check_card(self)

    @property
    def fingerprint(self) -> str:
        return digest(self.public_key)[:8].hex()


def _check_card(card: ContactCard) -> None:
    if not isinstance(card.name, str):
        raise InvalidCard("name must be text")
    try:
        name = card.name.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InvalidCard(f"name is not valid UTF-8: {exc}") from None
    if not 1 <= len(name) <= MAX_NAME_BYTES:
        raise InvalidCard(f"name must be 1-{MAX_NAME_BYTES} bytes, got {len(name)}")
    if len(card.public_key) != PUBLIC_KEY_SIZE:
        raise InvalidCard(f"public key must be {PUBLIC_KEY_SIZE} bytes, got {len(card.public_key)}")
    if len(card.extensions) > MAX_EXTENSIONS:
        raise InvalidCard(f"at most {MAX_EXTENSIONS} extensions allowed")
    prev = None
    for key, value in card.extensions:
        if not 1 <= len(key) <= MAX_EXT_KEY:
            raise InvalidCard(f"extension key must be 1-{MAX_EXT_KEY} bytes")
        if len(value) > MAX_EXT_VALUE:
            raise InvalidCard(f"extension value exceeds {MAX_EXT_VALUE} bytes")
        if prev is not None and key <= prev:
            raise InvalidCard(f"duplicate extension key {key!r}")
        prev = key


def encode_contact_card(card: ContactCard) -> bytes:
    _check_card(card)
    name = card.name.encode("utf-8")
    out = bytearray(CARD_MAGIC)
    out.append(CARD_VERSION)
    out.append(len(name))
    out += name
    out.append(len(card.public_key))
    out += card.public_key
    out.append(len(card.extensions))
    for key, value in card.extensions:
        out.append(len(key))
        out += key
        out += struct.pack(">H", len(value))
        out += value
    return bytes(out)


class _Reader:
    """Cursor over a byte string that raises ``error`` on truncation."""

    def __init__(self, data: bytes, error: type[WireError]):
        self.data = bytes(data)
        self.pos = 0
        self.error = error

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise self.error(f"truncated: need {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise self.error(f"{len(self.data) - self.pos} trailing bytes")


def _read_card(r: _Reader) -> ContactCard:
    if r.take(2) != CARD_MAGIC:
        raise MalformedCard("bad card magic")
    if r.u8() != CARD_VERSION:
        raise MalformedCard("unsupported card version")
    raw_name = r.take(r.u8())
    try:
        name = raw_name.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedCard("name is not UTF-8") from None
    key = r.take(r.u8())
    count = r.u8()
    exts = []
    for _ in range(count):
        k = r.take(r.u8())
        v = r.take(r.u16())
        if exts and k <= exts[-1][0]:
            raise MalformedCard("extension keys not strictly ascending")
        exts.append((k, v))
    try:
        return ContactCard(name, key, tuple(exts))
    except InvalidCard as exc:
        raise MalformedCard(str(exc)) from None


def decode_contact_card(data: bytes) -> ContactCard:
    r = _Reader(data, MalformedCard)
    card = _read_card(r)
    r.finish()
    return card


# --------------------------------------------------------------------------
# hashing and commitments


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class NoncePair:
    success_nonce: bytes
    abort_nonce: bytes

    def __post_init__(self) -> None:
        if len(self.success_nonce) != NONCE_SIZE or len(self.abort_nonce) != NONCE_SIZE:
            raise ValueError("nonces must be 32 bytes")
        if self.success_nonce == self.abort_nonce:
            raise ValueError("success and abort nonces must differ")

    @classmethod
    def generate(cls, rng) -> NoncePair:
        """Draw both nonces from ``rng`` (anything with ``randbytes``)."""
        while True:
            s, a = rng.randbytes(NONCE_SIZE), rng.randbytes(NONCE_SIZE)
            if s != a:
                return cls(s, a)


@dataclass(frozen=True)
class InnerPreimage:
    h_success: bytes
    h_abort: bytes
    card: ContactCard

    def to_bytes(self) -> bytes:
        card = encode_contact_card(self.card)
        return (
            INNER_MAGIC
            + bytes([INNER_VERSION])
            + self.h_success
            + self.h_abort
            + struct.pack(">H", len(card))
            + card
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> InnerPreimage:
        r = _Reader(data, MalformedInner)
        if r.take(4) != INNER_MAGIC:
            raise MalformedInner("bad inner magic")
        if r.u8() != INNER_VERSION:
            raise MalformedInner("unsupported inner version")
        h_success = r.take(DIGEST_SIZE)
        h_abort = r.take(DIGEST_SIZE)
        card_len = r.u16()
        if card_len != r.remaining():
            raise MalformedInner(f"card_len {card_len} != {r.remaining()} remaining bytes")
        try:
            card = decode_contact_card(r.take(card_len))
        except MalformedCard as exc:
            raise MalformedInner(f"embedded card: {exc}") from None
        return cls(h_success, h_abort, card)


def make_commitment(card: ContactCard, nonces: NoncePair) -> tuple[InnerPreimage, bytes]:
    inner = InnerPreimage(digest(nonces.success_nonce), digest(nonces.abort_nonce), card)
    return inner, digest(inner.to_bytes())


def verify_inner(outer: bytes, inner_bytes: bytes) -> InnerPreimage:
    """Open a commitment.  The returned preimage carries the card and both
    nonce digests."""
    if not hmac.compare_digest(digest(inner_bytes), outer):
        raise CommitmentMismatch("inner preimage does not hash to the outer commitment")
    return InnerPreimage.from_bytes(inner_bytes)


def aggregate(session_id: bytes, group_size: int, outers: Sequence[bytes]) -> bytes:
    if len(session_id) != SESSION_ID_SIZE:
        raise ValueError("session id must be 8 bytes")
    if not outers or len(outers) != group_size:
        raise SizeMismatch(f"expected {group_size} commitments, got {len(outers)}")
    if any(len(o) != DIGEST_SIZE for o in outers):
        raise ValueError("commitments must be 32 bytes")
    ordered = sorted(outers)
    if len(set(ordered)) != len(ordered):
        raise DuplicateCommitment("commitment list contains duplicates")
    return digest(
        AGGREGATE_TAG + bytes([AGGREGATE_VERSION]) + session_id + bytes([group_size]) + b"".join(ordered)
    )


def verify_nonce(expected: bytes, nonce: bytes) -> bool:
    return hmac.compare_digest(digest(nonce), expected)


def roster_digest(cards: Iterable[ContactCard]) -> bytes:
    """Fingerprint of an ordered card list, used to compare imported rosters."""
    h = hashlib.sha256()
    for card in cards:
        enc = encode_contact_card(card)
        h.update(struct.pack(">H", len(enc)) + enc)
    return h.digest()


# --------------------------------------------------------------------------
# in-band messages


class MsgType(enum.IntEnum):
    HELLO = 0x00
    COMMIT = 0x01
    ROSTER = 0x02
    REVEAL = 0x03
    REVEAL_SET = 0x04
    CONFIRM = 0x05
    SUCCESS_SET = 0x06
    ABORT = 0x07


@dataclass(frozen=True)
class Hello:
    session_id: bytes
    protocol_version: int = PROTOCOL_VERSION
    type = MsgType.HELLO


@dataclass(frozen=True)
class Commit:
    session_id: bytes
    outer: bytes
    type = MsgType.COMMIT


@dataclass(frozen=True)
class Roster:
    session_id: bytes
    outers: tuple[bytes, ...]
    type = MsgType.ROSTER


@dataclass(frozen=True)
class Reveal:
    session_id: bytes
    inner: bytes
    type = MsgType.REVEAL


@dataclass(frozen=True)
class RevealSet:
    session_id: bytes
    inners: tuple[bytes, ...]
    type = MsgType.REVEAL_SET


@dataclass(frozen=True)
class Confirm:
    session_id: bytes
    success_nonce: bytes
    type = MsgType.CONFIRM


@dataclass(frozen=True)
class SuccessSet:
    session_id: bytes
    nonces: tuple[bytes, ...]
    type = MsgType.SUCCESS_SET


@dataclass(frozen=True)
class Abort:
    session_id: bytes
    abort_nonce: bytes
    reason: AbortReason
    type = MsgType.ABORT


Message = Union[Hello, Commit, Roster, Reveal, RevealSet, Confirm, SuccessSet, Abort]


def _fixed(value: bytes, size: int, what: str) -> bytes:
    if len(value) != size:
        raise MalformedMessage(f"{what} must be {size} bytes")
    return value


def _encode_body(msg: Message) -> bytes:
    if isinstance(msg, Hello):
        return bytes([msg.protocol_version])
    if isinstance(msg, (Commit,)):
        return _fixed(msg.outer, DIGEST_SIZE, "outer")
    if isinstance(msg, Roster):
        outers = list(msg.outers)
        if not 1 <= len(outers) <= 255:
            raise MalformedMessage("roster size out of range")
        for o in outers:
            _fixed(o, DIGEST_SIZE, "outer")
        if any(a >= b for a, b in zip(outers, outers[1:])):
            raise MalformedMessage("roster must be strictly ascending")
        return bytes([len(outers)]) + b"".join(outers)
    if isinstance(msg, Reveal):
        return struct.pack(">H", len(msg.inner)) + msg.inner
    if isinstance(msg, RevealSet):
        if not 1 <= len(msg.inners) <= 255:
            raise MalformedMessage("reveal set size out of range")
        return bytes([len(msg.inners)]) + b"".join(struct.pack(">H", len(i)) + i for i in msg.inners)
    if isinstance(msg, Confirm):
        return _fixed(msg.success_nonce, NONCE_SIZE, "nonce")
    if isinstance(msg, SuccessSet):
        if not 1 <= len(msg.nonces) <= 255:
            raise MalformedMessage("success set size out of range")
        return bytes([len(msg.nonces)]) + b"".join(_fixed(n, NONCE_SIZE, "nonce") for n in msg.nonces)
    if isinstance(msg, Abort):
        return _fixed(msg.abort_nonce, NONCE_SIZE, "nonce") + bytes([int(msg.reason)])
    raise MalformedMessage(f"unknown message {msg!r}")


def encode_message(msg: Message) -> bytes:
    _fixed(msg.session_id, SESSION_ID_SIZE, "session id")
    frame = bytes([int(msg.type)]) + msg.session_id + _encode_body(msg)
    return struct.pack(">I", len(frame)) + frame


def decode_message(data: bytes) -> Message:
    if len(data) < 4:
        raise MalformedMessage("missing length prefix")
    (length,) = struct.unpack(">I", data[:4])
    if length > len(data) - 4:
        raise MalformedMessage(f"length prefix {length} exceeds {len(data) - 4} available bytes")
    if length < len(data) - 4:
        raise MalformedMessage("trailing bytes after message")
    r = _Reader(data[4:], MalformedMessage)
    try:
        kind = MsgType(r.u8())
    except ValueError:
        raise MalformedMessage(f"unknown message type 0x{data[4]:02x}") from None
    sid = r.take(SESSION_ID_SIZE)

    if kind is MsgType.HELLO:
        msg: Message = Hello(sid, r.u8())
    elif kind is MsgType.COMMIT:
        msg = Commit(sid, r.take(DIGEST_SIZE))
    elif kind is MsgType.ROSTER:
        n = r.u8()
        if n == 0:
            raise MalformedMessage("empty roster")
        outers = tuple(r.take(DIGEST_SIZE) for _ in range(n))
        if any(a >= b for a, b in zip(outers, outers[1:])):
            raise MalformedMessage("roster not strictly ascending")
        msg = Roster(sid, outers)
    elif kind is MsgType.REVEAL:
        msg = Reveal(sid, r.take(r.u16()))
    elif kind is MsgType.REVEAL_SET:
        n = r.u8()
        if n == 0:
            raise MalformedMessage("empty reveal set")
        msg = RevealSet(sid, tuple(r.take(r.u16()) for _ in range(n)))
    elif kind is MsgType.CONFIRM:
        msg = Confirm(sid, r.take(NONCE_SIZE))
    elif kind is MsgType.SUCCESS_SET:
        n = r.u8()
        if n == 0:
            raise MalformedMessage("empty success set")
        msg = SuccessSet(sid, tuple(r.take(NONCE_SIZE) for _ in range(n)))
    else:
        nonce = r.take(NONCE_SIZE)
        try:
            reason = AbortReason(r.u8())
        except ValueError:
            raise MalformedMessage("unknown abort reason") from None
        msg = Abort(sid, nonce, reason)
    r.finish()
    return msg


# --------------------------------------------------------------------------
# out-of-band payloads

OOB_INIT = 0x01
OOB_VERIFY = 0x02


@dataclass(frozen=True)
class OobInit:
    session_id: bytes
    group_size: int
    descriptor: str
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class OobVerify:
    session_id: bytes
    aggregate: bytes


OobPayload = Union[OobInit, OobVerify]


def encode_oob(payload: OobPayload) -> bytes:
    if len(payload.session_id) != SESSION_ID_SIZE:
        raise MalformedOob("session id must be 8 bytes")
    if isinstance(payload, OobInit):
        if not MIN_GROUP_SIZE <= payload.group_size <= MAX_GROUP_SIZE:
            raise MalformedOob(f"group size {payload.group_size} outside [2, 16]")
        desc = payload.descriptor.encode("utf-8")
        if not 1 <= len(desc) <= MAX_DESCRIPTOR:
            raise MalformedOob("descriptor must be 1-64 bytes")
        return (
            bytes([OOB_INIT, payload.version])
            + payload.session_id
            + bytes([payload.group_size, len(desc)])
            + desc
        )
    if isinstance(payload, OobVerify):
        if not MIN_OOB_DIGEST <= len(payload.aggregate) <= DIGEST_SIZE:
            raise MalformedOob("aggregate must be 16-32 bytes")
        return bytes([OOB_VERIFY]) + payload.session_id + payload.aggregate
    raise MalformedOob(f"unknown payload {payload!r}")


def decode_oob(data: bytes) -> OobPayload:
    r = _Reader(data, MalformedOob)
    kind = r.u8()
    if kind == OOB_INIT:
        version = r.u8()
        if version != PROTOCOL_VERSION:
            raise MalformedOob(f"unsupported version {version}")
        sid = r.take(SESSION_ID_SIZE)
        n = r.u8()
        if not MIN_GROUP_SIZE <= n <= MAX_GROUP_SIZE:
            raise MalformedOob(f"group size {n} outside [2, 16]")
        desc_len = r.u8()
        if desc_len == 0 or desc_len > MAX_DESCRIPTOR:
            raise MalformedOob("bad descriptor length")
        try:
            desc = r.take(desc_len).decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedOob("descriptor is not UTF-8") from None
        r.finish()
        return OobInit(sid, n, desc, version)
    if kind == OOB_VERIFY:
        sid = r.take(SESSION_ID_SIZE)
        agg = r.take(r.remaining())
        if not MIN_OOB_DIGEST <= len(agg) <= DIGEST_SIZE:
            raise MalformedOob("aggregate must be 16-32 bytes")
        return OobVerify(sid, agg)
    raise MalformedOob(f"unknown OOB payload type 0x{kind:02x}")
