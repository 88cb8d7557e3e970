"""Coordinator and participant state machines.

Sessions are event transducers: feed an :class:`Event` to
:func:`handle_event` (or ``session.handle``) and carry out the returned
:class:`Action` list.  Nothing here performs I/O or reads a clock, so a run
is fully determined by the injected RNG and the event sequence.

Topology is a star through the coordinator, but the coordinator is not
trusted: every device recomputes the aggregate, checks every reveal against
the roster and every success nonce against its committed digest.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Hashable, Union

from . import wire
from .wire import (
    Abort,
    AbortReason,
    Commit,
    Confirm,
    ContactCard,
    Hello,
    InnerPreimage,
    Message,
    NoncePair,
    OobInit,
    OobPayload,
    OobVerify,
    Reveal,
    RevealSet,
    Roster,
    SuccessSet,
    WireError,
)

PeerHandle = Hashable


class ProtocolError(Exception):
    pass


class GroupSizeOutOfBounds(ProtocolError, ValueError):
    pass


class IgnoredEvent(ProtocolError):
    """Raised for events delivered to a session that has already terminated."""


class NotTerminal(ProtocolError):
    pass


class Role(enum.Enum):
    COORDINATOR = "coordinator"
    PARTICIPANT = "participant"


class State(enum.Enum):
    # coordinator
    ANNOUNCING = "Announcing"
    COLLECTING = "Collecting"
    ROSTER_SENT = "RosterSent"
    COLLECT_REVEALS = "CollectReveals"
    REVEAL_SET_SENT = "RevealSetSent"
    COLLECT_CONFIRMS = "CollectConfirms"
    # participant
    AWAIT_INIT = "AwaitInit"
    JOINING = "Joining"
    COMMITTED = "Committed"
    AWAIT_ROSTER = "AwaitRoster"
    REVEALING = "Revealing"
    AWAIT_SUCCESS_SET = "AwaitSuccessSet"
    # shared
    LOCKED = "Locked"
    FINALIZED = "Finalized"
    ABORTED = "Aborted"


TERMINAL = frozenset({State.FINALIZED, State.ABORTED})


class Phase(enum.Enum):
    INITIALIZATION = "Initialization"
    VERIFICATION = "Verification"
    FINALIZATION = "Finalization"


_PHASE = {
    State.ANNOUNCING: Phase.INITIALIZATION,
    State.AWAIT_INIT: Phase.INITIALIZATION,
    State.JOINING: Phase.INITIALIZATION,
    State.COLLECTING: Phase.VERIFICATION,
    State.COMMITTED: Phase.VERIFICATION,
    State.AWAIT_ROSTER: Phase.VERIFICATION,
    State.ROSTER_SENT: Phase.VERIFICATION,
    State.COLLECT_REVEALS: Phase.VERIFICATION,
    State.REVEALING: Phase.VERIFICATION,
    State.REVEAL_SET_SENT: Phase.VERIFICATION,
    State.LOCKED: Phase.VERIFICATION,
    State.COLLECT_CONFIRMS: Phase.FINALIZATION,
    State.AWAIT_SUCCESS_SET: Phase.FINALIZATION,
    State.FINALIZED: Phase.FINALIZATION,
}


@dataclass(frozen=True)
class ProtocolConfig:
    round_timeout: float = 30.0
    protocol_version: int = wire.PROTOCOL_VERSION
    # transport descriptor the coordinator announces in INIT
    descriptor: str = "sim:local"
    oob_digest_bytes: int = wire.DIGEST_SIZE

    def __post_init__(self) -> None:
        if self.round_timeout <= 0:
            raise ValueError("round timeout must be positive")
        if not wire.MIN_OOB_DIGEST <= self.oob_digest_bytes <= wire.DIGEST_SIZE:
            raise ValueError("OOB digest length must be 16-32 bytes")


# ---------------------------------------------------------------- events


@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class OobReceived:
    payload: Union[OobPayload, bytes]


@dataclass(frozen=True)
class MessageReceived:
    peer: PeerHandle
    message: Union[Message, bytes]


@dataclass(frozen=True)
class PeerConnected:
    peer: PeerHandle


@dataclass(frozen=True)
class UserConfirmed:
    accept: bool


@dataclass(frozen=True)
class TimerFired:
    timer_id: str


Event = Union[Start, OobReceived, MessageReceived, PeerConnected, UserConfirmed, TimerFired]


# --------------------------------------------------------------- actions


@dataclass(frozen=True)
class Send:
    peer: PeerHandle
    message: Message


@dataclass(frozen=True)
class Broadcast:
    message: Message


@dataclass(frozen=True)
class EmitOob:
    payload: OobPayload


@dataclass(frozen=True)
class Connect:
    """Ask the transport to join the in-band network named in INIT.

    The transport answers with a :class:`PeerConnected` event carrying the
    coordinator's handle.
    """

    descriptor: str


@dataclass(frozen=True)
class SetTimer:
    timer_id: str
    duration: float


@dataclass(frozen=True)
class CancelTimer:
    timer_id: str


@dataclass(frozen=True)
class DisplayLock:
    pass


@dataclass(frozen=True)
class DisplayContacts:
    cards: tuple[ContactCard, ...]


@dataclass(frozen=True)
class DisplayAbort:
    reason: AbortReason


@dataclass(frozen=True)
class ImportContacts:
    cards: tuple[ContactCard, ...]


Action = Union[
    Send, Broadcast, EmitOob, Connect, SetTimer, CancelTimer,
    DisplayLock, DisplayContacts, DisplayAbort, ImportContacts,
]


# -------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class Finalized:
    cards: tuple[ContactCard, ...]


@dataclass(frozen=True)
class Aborted:
    reason: AbortReason
    phase: Phase


Outcome = Union[Finalized, Aborted]


class _Abort(Exception):
    """Internal control flow: unwind to the abort path with a reason."""

    def __init__(self, reason: AbortReason, detail: str = ""):
        super().__init__(detail or reason.label)
        self.reason = reason
        self.detail = detail


# -------------------------------------------------------------- sessions


@dataclass
class _Session:
    role: Role
    config: ProtocolConfig
    card: ContactCard
    nonces: NoncePair
    inner: InnerPreimage
    outer: bytes
    state: State
    session_id: bytes | None = None
    group_size: int = 0
    roster: tuple[bytes, ...] = ()
    inners: tuple[InnerPreimage, ...] = ()
    cards: tuple[ContactCard, ...] = ()
    history: list[State] = field(default_factory=list)
    timer: str | None = None
    abort_reason: AbortReason | None = None
    abort_phase: Phase | None = None
    abort_detail: str = ""

    def __post_init__(self) -> None:
        self.history.append(self.state)

    # -- helpers shared by both roles

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL

    @property
    def locked(self) -> bool:
        """True once the reveal set has been verified (lock was shown)."""
        return bool(self.inners)

    def _goto(self, state: State) -> None:
        self.state = state
        self.history.append(state)

    def _round(self, timer_id: str) -> list[Action]:
        out: list[Action] = []
        if self.timer is not None:
            out.append(CancelTimer(self.timer))
        self.timer = timer_id
        out.append(SetTimer(timer_id, self.config.round_timeout))
        return out

    def _stop_timer(self) -> list[Action]:
        if self.timer is None:
            return []
        t, self.timer = self.timer, None
        return [CancelTimer(t)]

    def _decode(self, message: Message | bytes) -> Message:
        if isinstance(message, (bytes, bytearray)):
            try:
                return wire.decode_message(bytes(message))
            except WireError as exc:
                raise _Abort(AbortReason.INTEGRITY_FAILURE, f"malformed message: {exc}") from None
        return message

    def _check_sid(self, msg: Message) -> None:
        if msg.session_id != self.session_id:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "session id mismatch")

    def _verify_reveal_set(self, inners: tuple[bytes, ...]) -> tuple[InnerPreimage, ...]:
        if len(inners) != self.group_size or len(self.roster) != self.group_size:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "reveal set size differs from group size")
        opened = []
        for outer, raw in zip(self.roster, inners):
            try:
                opened.append(wire.verify_inner(outer, raw))
            except WireError as exc:
                raise _Abort(AbortReason.INTEGRITY_FAILURE, f"reveal rejected: {exc}") from None
        return tuple(opened)

    def _lock(self, opened: tuple[InnerPreimage, ...]) -> list[Action]:
        self.inners = opened
        self.cards = tuple(i.card for i in opened)
        self._goto(State.LOCKED)
        return [DisplayLock()] + self._round("confirm")

    def _finalize(self, nonces: tuple[bytes, ...]) -> list[Action]:
        if len(nonces) != self.group_size:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "success set size differs from group size")
        for inner, nonce in zip(self.inners, nonces):
            if not wire.verify_nonce(inner.h_success, nonce):
                raise _Abort(AbortReason.INTEGRITY_FAILURE, "success nonce does not match commitment")
        out = self._stop_timer()
        self._goto(State.FINALIZED)
        return out + [DisplayContacts(self.cards), ImportContacts(self.cards)]

    def _abort_message(self, reason: AbortReason) -> Abort:
        return Abort(self.session_id, self.nonces.abort_nonce, reason)

    def _announces_abort(self) -> bool:
        raise NotImplementedError

    def _abort_actions(self, reason: AbortReason) -> list[Action]:
        raise NotImplementedError

    def _enter_aborted(self, reason: AbortReason, detail: str = "") -> list[Action]:
        out = self._stop_timer()
        self.abort_reason = reason
        self.abort_phase = _PHASE.get(self.state, Phase.VERIFICATION)
        self.abort_detail = detail
        self._goto(State.ABORTED)
        return out + [DisplayAbort(reason)]

    def _abort(self, reason: AbortReason, detail: str = "") -> list[Action]:
        sends = self._abort_actions(reason) if self._announces_abort() else []
        return sends + self._enter_aborted(reason, detail)

    def _abort_nonce_valid(self, peer: PeerHandle, nonce: bytes) -> bool | None:
        """True/False when the nonce can be checked, None when it cannot yet."""
        raise NotImplementedError

    def _on_abort(self, peer: PeerHandle, msg: Abort) -> list[Action]:
        valid = self._abort_nonce_valid(peer, msg.abort_nonce)
        if valid is False or (valid is None and self.locked):
            # forged: ignore
            return []
        return self._relay_abort(peer, msg) + self._enter_aborted(msg.reason, "peer aborted")

    def _relay_abort(self, peer: PeerHandle, msg: Abort) -> list[Action]:
        return []

    # -- dispatch

    def handle(self, event: Event) -> list[Action]:
        if self.terminal:
            raise IgnoredEvent(f"session is {self.state.value}; {type(event).__name__} ignored")
        try:
            return self._dispatch(event)
        except _Abort as abort:
            return self._abort(abort.reason, abort.detail)

    def _dispatch(self, event: Event) -> list[Action]:
        if isinstance(event, Start):
            return []
        if isinstance(event, TimerFired):
            if event.timer_id != self.timer:
                return []
            raise _Abort(AbortReason.TIMEOUT, f"timer {event.timer_id} expired")
        if isinstance(event, UserConfirmed):
            if not event.accept:
                raise _Abort(AbortReason.USER_DECLINED, "user declined")
            if self.state is State.LOCKED:
                return self._on_confirmed()
            return []
        if isinstance(event, OobReceived):
            payload = event.payload
            if isinstance(payload, (bytes, bytearray)):
                try:
                    payload = wire.decode_oob(bytes(payload))
                except WireError:
                    return []
            return self._on_oob(payload)
        if isinstance(event, PeerConnected):
            return self._on_connected(event.peer)
        if isinstance(event, MessageReceived):
            return self._on_message(event.peer, event.message)
        raise TypeError(f"unknown event {event!r}")

    def _on_confirmed(self) -> list[Action]:
        raise NotImplementedError

    def _on_oob(self, payload: OobPayload) -> list[Action]:
        raise NotImplementedError

    def _on_connected(self, peer: PeerHandle) -> list[Action]:
        raise NotImplementedError

    def _on_message(self, peer: PeerHandle, message: Message | bytes) -> list[Action]:
        raise NotImplementedError

    def _aggregate(self) -> bytes:
        agg = wire.aggregate(self.session_id, self.group_size, self.roster)
        return agg[: self.config.oob_digest_bytes]


@dataclass
class CoordinatorSession(_Session):
    peers: list[PeerHandle] = field(default_factory=list)
    hello: set = field(default_factory=set)
    commits: dict = field(default_factory=dict)
    peer_inners: dict = field(default_factory=dict)
    confirms: dict = field(default_factory=dict)
    oob_verified: bool = False
    own_confirmed: bool = False

    def _announces_abort(self) -> bool:
        return bool(self.peers)

    def _abort_actions(self, reason: AbortReason) -> list[Action]:
        return [Broadcast(self._abort_message(reason))]

    def _abort_nonce_valid(self, peer: PeerHandle, nonce: bytes) -> bool | None:
        inner = self.peer_inners.get(peer)
        if inner is None:
            return None
        return wire.verify_nonce(inner.h_abort, nonce)

    def _relay_abort(self, peer: PeerHandle, msg: Abort) -> list[Action]:
        return [Send(p, msg) for p in self.peers if p != peer]

    def _on_connected(self, peer: PeerHandle) -> list[Action]:
        if peer in self.peers:
            return []
        # the newcomer is recorded first so that an abort also reaches it
        self.peers.append(peer)
        if self.state not in (State.ANNOUNCING, State.COLLECTING):
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "peer joined after the roster was fixed")
        if len(self.peers) > self.group_size - 1:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "more devices than the announced group size")
        if self.state is State.ANNOUNCING:
            self._goto(State.COLLECTING)
        return []

    def _on_oob(self, payload: OobPayload) -> list[Action]:
        if not isinstance(payload, OobVerify) or payload.session_id != self.session_id:
            return []
        if self.state not in (State.ROSTER_SENT, State.COLLECT_REVEALS) and not self.oob_verified:
            raise _Abort(AbortReason.OOB_MISMATCH, "verification broadcast before roster")
        if payload.aggregate != self._aggregate()[: len(payload.aggregate)] or len(payload.aggregate) < wire.MIN_OOB_DIGEST:
            raise _Abort(AbortReason.OOB_MISMATCH, "OOB digest differs from local aggregate")
        if self.oob_verified:
            return []
        self.oob_verified = True
        self._goto(State.COLLECT_REVEALS)
        return self._maybe_reveal_set()

    def _on_message(self, peer: PeerHandle, message: Message | bytes) -> list[Action]:
        if peer not in self.peers:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "message from unknown peer")
        msg = self._decode(message)
        self._check_sid(msg)
        if isinstance(msg, Abort):
            return self._on_abort(peer, msg)
        if isinstance(msg, Hello) and self.state is State.COLLECTING and peer not in self.hello:
            if msg.protocol_version != self.config.protocol_version:
                raise _Abort(AbortReason.INTEGRITY_FAILURE, "protocol version mismatch")
            self.hello.add(peer)
            return []
        if isinstance(msg, Commit) and self.state is State.COLLECTING:
            if peer not in self.hello:
                # a lost HELLO stalls the join round rather than failing it
                return []
            return self._on_commit(peer, msg.outer)
        if isinstance(msg, Reveal) and self.state in (State.ROSTER_SENT, State.COLLECT_REVEALS):
            return self._on_reveal(peer, msg.inner)
        if isinstance(msg, Confirm) and self.state in (State.LOCKED, State.COLLECT_CONFIRMS):
            return self._on_confirm(peer, msg.success_nonce)
        raise _Abort(AbortReason.INTEGRITY_FAILURE, f"unexpected {msg.type.name} in {self.state.value}")

    def _on_commit(self, peer: PeerHandle, outer: bytes) -> list[Action]:
        if peer in self.commits:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "duplicate COMMIT from peer")
        if outer == self.outer or outer in self.commits.values():
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "duplicate commitment value")
        self.commits[peer] = outer
        if len(self.commits) < self.group_size - 1:
            return []
        self.roster = tuple(sorted([self.outer, *self.commits.values()]))
        self._goto(State.ROSTER_SENT)
        return [
            Broadcast(Roster(self.session_id, self.roster)),
            EmitOob(OobVerify(self.session_id, self._aggregate())),
            *self._round("reveal"),
        ]

    def _on_reveal(self, peer: PeerHandle, raw: bytes) -> list[Action]:
        if peer in self.peer_inners:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "duplicate REVEAL from peer")
        try:
            self.peer_inners[peer] = wire.verify_inner(self.commits[peer], raw)
        except WireError as exc:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, f"reveal rejected: {exc}") from None
        return self._maybe_reveal_set()

    def _maybe_reveal_set(self) -> list[Action]:
        if not self.oob_verified or len(self.peer_inners) < self.group_size - 1:
            return []
        by_outer = {self.outer: self.inner.to_bytes()}
        for peer, inner in self.peer_inners.items():
            by_outer[self.commits[peer]] = inner.to_bytes()
        inners = tuple(by_outer[o] for o in self.roster)
        self._goto(State.REVEAL_SET_SENT)
        out: list[Action] = [Broadcast(RevealSet(self.session_id, inners))]
        return out + self._lock(self._verify_reveal_set(inners))

    def _on_confirm(self, peer: PeerHandle, nonce: bytes) -> list[Action]:
        if peer in self.confirms:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "duplicate CONFIRM from peer")
        if not wire.verify_nonce(self.peer_inners[peer].h_success, nonce):
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "success nonce does not match commitment")
        self.confirms[peer] = nonce
        return self._maybe_finalize()

    def _on_confirmed(self) -> list[Action]:
        self.own_confirmed = True
        self._goto(State.COLLECT_CONFIRMS)
        return self._maybe_finalize()

    def _maybe_finalize(self) -> list[Action]:
        if not self.own_confirmed or len(self.confirms) < self.group_size - 1:
            return []
        by_outer = {self.outer: self.nonces.success_nonce}
        for peer, nonce in self.confirms.items():
            by_outer[self.commits[peer]] = nonce
        nonces = tuple(by_outer[o] for o in self.roster)
        return [Broadcast(SuccessSet(self.session_id, nonces))] + self._finalize(nonces)


@dataclass
class ParticipantSession(_Session):
    coordinator: PeerHandle | None = None
    descriptor: str | None = None
    oob_digest: bytes | None = None
    sent_commit: bool = False

    @property
    def published_outer(self) -> bytes | None:
        """The outer commitment, once it has actually been sent."""
        return self.outer if self.sent_commit else None

    def _announces_abort(self) -> bool:
        return self.sent_commit

    def _abort_actions(self, reason: AbortReason) -> list[Action]:
        return [Send(self.coordinator, self._abort_message(reason))]

    def _abort_nonce_valid(self, peer: PeerHandle, nonce: bytes) -> bool | None:
        if not self.inners:
            return None
        # the coordinator relays, so accept any member's committed abort nonce
        return any(wire.verify_nonce(i.h_abort, nonce) for i in self.inners)

    def _on_connected(self, peer: PeerHandle) -> list[Action]:
        if self.state is not State.JOINING:
            return []
        self.coordinator = peer
        self.sent_commit = True
        out: list[Action] = [
            Send(peer, Hello(self.session_id, self.config.protocol_version)),
            Send(peer, Commit(self.session_id, self.outer)),
        ]
        self._goto(State.COMMITTED)
        self._goto(State.AWAIT_ROSTER)
        return out + self._round("roster")

    def _on_oob(self, payload: OobPayload) -> list[Action]:
        if isinstance(payload, OobInit):
            if self.state is not State.AWAIT_INIT:
                return []
            self.session_id = payload.session_id
            self.group_size = payload.group_size
            self.descriptor = payload.descriptor
            self._goto(State.JOINING)
            return [Connect(payload.descriptor)] + self._round("join")
        if payload.session_id != self.session_id or self.session_id is None:
            return []
        if self.state in (State.AWAIT_INIT, State.JOINING):
            raise _Abort(AbortReason.OOB_MISMATCH, "verification broadcast before commitment")
        if self.oob_digest is not None:
            if payload.aggregate != self.oob_digest:
                raise _Abort(AbortReason.OOB_MISMATCH, "conflicting OOB verification broadcasts")
            return []
        self.oob_digest = payload.aggregate
        return self._maybe_check_roster()

    def _on_message(self, peer: PeerHandle, message: Message | bytes) -> list[Action]:
        if peer != self.coordinator:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "message from unknown peer")
        msg = self._decode(message)
        self._check_sid(msg)
        if isinstance(msg, Abort):
            return self._on_abort(peer, msg)
        if isinstance(msg, Roster) and self.state is State.AWAIT_ROSTER and not self.roster:
            self.roster = msg.outers
            return self._maybe_check_roster()
        if isinstance(msg, RevealSet) and self.state is State.REVEALING:
            return self._lock(self._verify_reveal_set(msg.inners))
        if isinstance(msg, SuccessSet) and self.state is State.AWAIT_SUCCESS_SET:
            return self._finalize(msg.nonces)
        raise _Abort(AbortReason.INTEGRITY_FAILURE, f"unexpected {msg.type.name} in {self.state.value}")

    def _maybe_check_roster(self) -> list[Action]:
        if not self.roster or self.oob_digest is None:
            return []
        if len(self.roster) != self.group_size:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "roster size differs from group size")
        if len(self.oob_digest) < wire.MIN_OOB_DIGEST or self.oob_digest != wire.aggregate(
            self.session_id, self.group_size, self.roster
        )[: len(self.oob_digest)]:
            raise _Abort(AbortReason.OOB_MISMATCH, "OOB digest differs from roster aggregate")
        if self.outer not in self.roster:
            raise _Abort(AbortReason.INTEGRITY_FAILURE, "own commitment missing from roster")
        self._goto(State.REVEALING)
        return [Send(self.coordinator, Reveal(self.session_id, self.inner.to_bytes()))] + self._round("reveal")

    def _on_confirmed(self) -> list[Action]:
        self._goto(State.AWAIT_SUCCESS_SET)
        return [Send(self.coordinator, Confirm(self.session_id, self.nonces.success_nonce))] + self._round(
            "success"
        )


# ------------------------------------------------------------ constructors


def coordinator_new(
    config: ProtocolConfig, group_size: int, card: ContactCard, rng
) -> tuple[CoordinatorSession, list[Action]]:
    """Start a session as coordinator.  ``rng`` needs ``randbytes``."""
    if not wire.MIN_GROUP_SIZE <= group_size <= wire.MAX_GROUP_SIZE:
        raise GroupSizeOutOfBounds(f"group size {group_size} outside [2, 16]")
    wire.encode_contact_card(card)
    session_id = rng.randbytes(wire.SESSION_ID_SIZE)
    nonces = NoncePair.generate(rng)
    inner, outer = wire.make_commitment(card, nonces)
    s = CoordinatorSession(
        role=Role.COORDINATOR,
        config=config,
        card=card,
        nonces=nonces,
        inner=inner,
        outer=outer,
        state=State.ANNOUNCING,
        session_id=session_id,
        group_size=group_size,
    )
    actions: list[Action] = [EmitOob(OobInit(session_id, group_size, config.descriptor))]
    return s, actions + s._round("join")


def participant_new(config: ProtocolConfig, card: ContactCard, rng) -> tuple[ParticipantSession, list[Action]]:
    wire.encode_contact_card(card)
    nonces = NoncePair.generate(rng)
    inner, outer = wire.make_commitment(card, nonces)
    s = ParticipantSession(
        role=Role.PARTICIPANT,
        config=config,
        card=card,
        nonces=nonces,
        inner=inner,
        outer=outer,
        state=State.AWAIT_INIT,
    )
    return s, s._round("init")


Session = Union[CoordinatorSession, ParticipantSession]


def handle_event(session: Session, event: Event) -> tuple[Session, list[Action]]:
    actions = session.handle(event)
    return session, actions


def straggler_notice(session: Session, event: Event) -> Send | None:
    """Abort notice for a peer that reaches an already aborted session.

    Terminal sessions emit nothing through :func:`handle_event`; drivers use
    this to tell a late joiner that the session is over, instead of leaving
    it to wait for its round timer.  Only connections and non-ABORT messages
    get an answer, so two aborted devices cannot keep answering each other.
    Drivers should answer each peer at most once.
    """
    if session.state is not State.ABORTED or session.session_id is None:
        return None
    if isinstance(event, PeerConnected):
        peer = event.peer
    elif isinstance(event, MessageReceived):
        m = event.message
        if isinstance(m, Abort) or (isinstance(m, (bytes, bytearray)) and len(m) > 4 and m[4] == wire.MsgType.ABORT):
            return None
        peer = event.peer
    else:
        return None
    if isinstance(session, ParticipantSession) and peer != session.coordinator:
        return None
    return Send(peer, session._abort_message(session.abort_reason))


def session_outcome(session: Session) -> Outcome:
    if session.state is State.FINALIZED:
        return Finalized(session.cards)
    if session.state is State.ABORTED:
        return Aborted(session.abort_reason, session.abort_phase)
    raise NotTerminal(f"session is still {session.state.value}")
