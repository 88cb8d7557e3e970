"""Deterministic discrete-event simulation of a pairing group.

:func:`run_simulation` wires one coordinator and ``n - 1`` participants to a
:class:`~pairsonic.transports.SimNetwork`, optionally lets an adversary
interpose on in-band traffic (or tamper with the OOB broadcast), answers the
lock prompts through a user oracle and reports what every device ended up
with.  Virtual time only advances through network latency, OOB airtime and
timers, and timers fire only once nothing else is deliverable.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from . import protocol as P
from .modem import ModemConfig
from .transports import ConnectFailed, Envelope, SimNetwork
from .wire import (
    AbortReason,
    ContactCard,
    InnerPreimage,
    MsgType,
    RevealSet,
    Roster,
    WireError,
    decode_message,
    encode_message,
    encode_oob,
    roster_digest,
)


class NonQuiescent(RuntimeError):
    """The event budget ran out before every device terminated."""


# ------------------------------------------------------------ adversaries


@dataclass(frozen=True)
class NoAdversary:
    pass


@dataclass(frozen=True)
class FlipInBandBit:
    ordinal: int
    bit: int


@dataclass(frozen=True)
class SubstituteCommit:
    """Replace device ``victim``'s outer commitment in transit.

    For participants the COMMIT is rewritten; for the coordinator (victim 0),
    whose commitment never travels alone, its entry in every ROSTER is.
    """

    victim: int
    replacement: bytes | None = None


@dataclass(frozen=True)
class SubstituteReveal:
    victim: int
    replacement: ContactCard | None = None


@dataclass(frozen=True)
class SplitRoster:
    """Show a doctored roster to ``targets`` and the real one to the rest."""

    targets: tuple[int, ...] | None = None


@dataclass(frozen=True)
class InjectExtraParticipant:
    pass


@dataclass(frozen=True)
class DropMessage:
    ordinal: int


@dataclass(frozen=True)
class SuppressAborts:
    pass


@dataclass(frozen=True)
class TamperOobDigest:
    bit: int


AdversaryKind = Union[
    NoAdversary, FlipInBandBit, SubstituteCommit, SubstituteReveal, SplitRoster,
    InjectExtraParticipant, DropMessage, SuppressAborts, TamperOobDigest,
]
Adversary = Union[AdversaryKind, tuple]

# adversaries that alter a committed value; any honest finalization is unsafe
SUBSTITUTION = (FlipInBandBit, SubstituteCommit, SubstituteReveal, SplitRoster, InjectExtraParticipant, TamperOobDigest)


def _parts(adversary: Adversary) -> tuple[AdversaryKind, ...]:
    if isinstance(adversary, tuple):
        return tuple(a for part in adversary for a in _parts(part))
    return (adversary,)


def is_substitution(adversary: Adversary) -> bool:
    return any(isinstance(a, SUBSTITUTION) for a in _parts(adversary))


def expected_reasons(adversary: Adversary) -> frozenset[AbortReason] | None:
    """Abort reasons an honest device may legitimately report, or None when
    the scenario should finalize."""
    parts = [a for a in _parts(adversary) if not isinstance(a, (NoAdversary, SuppressAborts))]
    if not parts:
        return None
    out: set[AbortReason] = set()
    for a in parts:
        if isinstance(a, (TamperOobDigest, SplitRoster)):
            out.add(AbortReason.OOB_MISMATCH)
        elif isinstance(a, DropMessage):
            out.add(AbortReason.TIMEOUT)
        else:
            out |= {AbortReason.OOB_MISMATCH, AbortReason.INTEGRITY_FAILURE}
    return frozenset(out)


class _Attacker:
    """Active in-band attacker: sees and rewrites every unicast."""

    def __init__(self, parts: Sequence[AdversaryKind], handles: Sequence[str], rng: random.Random):
        self.parts = [p for p in parts if not isinstance(p, (NoAdversary, InjectExtraParticipant))]
        self.handles = list(handles)
        self.coordinator = handles[0]
        self.rng = rng
        self.commits: set[bytes] = set()
        self.roster: tuple[bytes, ...] = ()
        self.fakes: dict[bytes, bytes] = {}

    def _coordinator_outer(self) -> bytes | None:
        left = [o for o in self.roster if o not in self.commits]
        return left[0] if len(left) == 1 else None

    def _fake(self, real: bytes, given: bytes | None = None) -> bytes:
        if real not in self.fakes:
            self.fakes[real] = given if given is not None else self.rng.randbytes(32)
        return self.fakes[real]

    def interpose(self, env: Envelope) -> list[Envelope]:
        out = [env]
        for part in self.parts:
            out = [e2 for e in out for e2 in self._apply(part, e)]
        return out

    def _apply(self, part: AdversaryKind, env: Envelope) -> list[Envelope]:
        data = env.data
        if isinstance(part, FlipInBandBit):
            if env.ordinal != part.ordinal or not data:
                return [env]
            bit = part.bit % (8 * len(data))
            b = bytearray(data)
            b[bit // 8] ^= 0x80 >> (bit % 8)
            return [Envelope(env.ordinal, env.src, env.dst, bytes(b))]
        if isinstance(part, DropMessage):
            return [] if env.ordinal == part.ordinal else [env]
        if isinstance(part, SuppressAborts):
            return [] if len(data) > 4 and data[4] == MsgType.ABORT else [env]
        try:
            msg = decode_message(data)
        except WireError:
            return [env]
        if msg.type is MsgType.COMMIT:
            self.commits.add(msg.outer)
        elif msg.type is MsgType.ROSTER and not self.roster:
            self.roster = msg.outers
        new = self._rewrite(part, env, msg)
        if new is None:
            return [env]
        return [Envelope(env.ordinal, env.src, env.dst, encode_message(new))]

    def _index(self, handle: str) -> int:
        return self.handles.index(handle) if handle in self.handles else -1

    def _rewrite(self, part: AdversaryKind, env: Envelope, msg):
        src = self._index(env.src)
        dst = self._index(env.dst)
        if isinstance(part, SubstituteCommit):
            if part.victim != 0 and msg.type is MsgType.COMMIT and src == part.victim:
                return type(msg)(msg.session_id, self._fake(msg.outer, part.replacement))
            if part.victim == 0 and msg.type is MsgType.ROSTER:
                return self._swap_roster(msg, part.replacement)
        elif isinstance(part, SubstituteReveal):
            if part.victim != 0 and msg.type is MsgType.REVEAL and src == part.victim:
                return type(msg)(msg.session_id, self._forge_inner(msg.inner, part.replacement))
            if part.victim == 0 and msg.type is MsgType.REVEAL_SET:
                target = self._coordinator_outer()
                if target is None or target not in self.roster:
                    return None
                i = self.roster.index(target)
                inners = list(msg.inners)
                inners[i] = self._forge_inner(inners[i], part.replacement)
                return RevealSet(msg.session_id, tuple(inners))
        elif isinstance(part, SplitRoster):
            if msg.type is MsgType.ROSTER:
                n = len(self.handles)
                targets = part.targets if part.targets is not None else tuple(range(1, max(2, (n + 1) // 2)))
                if dst in targets:
                    return self._swap_roster(msg, None)
        return None

    def _swap_roster(self, msg: Roster, replacement: bytes | None) -> Roster | None:
        target = self._coordinator_outer()
        if target is None:
            target = msg.outers[0]
        fake = self._fake(target, replacement)
        outers = tuple(sorted(fake if o == target else o for o in msg.outers))
        return Roster(msg.session_id, outers)

    def _forge_inner(self, raw: bytes, card: ContactCard | None) -> bytes:
        try:
            real = InnerPreimage.from_bytes(raw)
        except WireError:
            return raw
        if card is None:
            card = ContactCard("Mallory", self.rng.randbytes(32))
        return InnerPreimage(real.h_success, real.h_abort, card).to_bytes()


def _oob_tamper(parts: Sequence[AdversaryKind]):
    bits = [p.bit for p in parts if isinstance(p, TamperOobDigest)]
    if not bits:
        return None

    def tamper(data: bytes) -> bytes:
        # VERIFY = type | session id (8) | aggregate; only the aggregate is hit
        if not data or data[0] != 0x02 or len(data) <= 9:
            return data
        b = bytearray(data)
        agg_bits = 8 * (len(b) - 9)
        for bit in bits:
            k = bit % agg_bits
            b[9 + k // 8] ^= 0x80 >> (k % 8)
        return bytes(b)

    return tamper


# ---------------------------------------------------------------- oracles


@dataclass(frozen=True)
class Honest:
    """Confirm exactly when every group member shows the lock; otherwise
    the users keep waiting and the round timer decides."""


@dataclass(frozen=True)
class AlwaysConfirm:
    pass


@dataclass(frozen=True)
class AlwaysDecline:
    pass


@dataclass(frozen=True)
class ConfirmSubset:
    """Listed devices confirm, the rest decline."""

    indices: tuple[int, ...]


UserOracle = Union[Honest, AlwaysConfirm, AlwaysDecline, ConfirmSubset]


def _answer(oracle: UserOracle, index: int, all_locked: bool) -> bool | None:
    if isinstance(oracle, Honest):
        return True if all_locked else None
    if isinstance(oracle, AlwaysConfirm):
        return True
    if isinstance(oracle, AlwaysDecline):
        return False
    if isinstance(oracle, ConfirmSubset):
        return index in oracle.indices
    raise TypeError(f"unknown oracle {oracle!r}")


# ------------------------------------------------------------ naming / parsing


def adversary_name(adversary: Adversary) -> str:
    parts = _parts(adversary)
    if len(parts) > 1:
        return "+".join(adversary_name(p) for p in parts)
    a = parts[0]
    if isinstance(a, NoAdversary):
        return "none"
    if isinstance(a, FlipInBandBit):
        return f"flip-bit:{a.ordinal}:{a.bit}"
    if isinstance(a, SubstituteCommit):
        return f"substitute-commit:{a.victim}"
    if isinstance(a, SubstituteReveal):
        return f"substitute-reveal:{a.victim}"
    if isinstance(a, SplitRoster):
        return "split-roster" + (":" + ",".join(map(str, a.targets)) if a.targets is not None else "")
    if isinstance(a, InjectExtraParticipant):
        return "inject-extra"
    if isinstance(a, DropMessage):
        return f"drop:{a.ordinal}"
    if isinstance(a, SuppressAborts):
        return "suppress-aborts"
    if isinstance(a, TamperOobDigest):
        return f"tamper-oob:{a.bit}"
    raise TypeError(f"unknown adversary {a!r}")


def _ints(text: str, count: int | None, what: str) -> list[int]:
    items = [t for t in text.split(",") if t] if count is None else text.split(":")
    try:
        vals = [int(t) for t in items]
    except ValueError:
        raise ValueError(f"{what}: expected integers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise ValueError(f"{what}: expected {count} parameter(s)")
    if any(v < 0 for v in vals):
        raise ValueError(f"{what}: parameters must be non-negative")
    return vals


def parse_adversary(text: str) -> Adversary:
    """Parse ``name[:params]``; several can be joined with ``+``."""
    if "+" in text:
        return tuple(parse_adversary(t) for t in text.split("+"))
    name, _, params = text.partition(":")
    if name == "none" and not params:
        return NoAdversary()
    if name == "flip-bit":
        return FlipInBandBit(*_ints(params, 2, name))
    if name == "substitute-commit":
        return SubstituteCommit(*_ints(params, 1, name))
    if name == "substitute-reveal":
        return SubstituteReveal(*_ints(params, 1, name))
    if name == "split-roster":
        return SplitRoster(tuple(_ints(params, None, name)) if params else None)
    if name == "inject-extra" and not params:
        return InjectExtraParticipant()
    if name == "drop":
        return DropMessage(*_ints(params, 1, name))
    if name == "suppress-aborts" and not params:
        return SuppressAborts()
    if name == "tamper-oob":
        return TamperOobDigest(*_ints(params, 1, name))
    raise ValueError(f"unknown adversary {text!r}")


def oracle_name(oracle: UserOracle) -> str:
    if isinstance(oracle, Honest):
        return "honest"
    if isinstance(oracle, AlwaysConfirm):
        return "always-confirm"
    if isinstance(oracle, AlwaysDecline):
        return "always-decline"
    return "confirm-subset:" + ",".join(map(str, oracle.indices))


def parse_oracle(text: str) -> UserOracle:
    name, _, params = text.partition(":")
    if name == "honest" and not params:
        return Honest()
    if name == "always-confirm" and not params:
        return AlwaysConfirm()
    if name == "always-decline" and not params:
        return AlwaysDecline()
    if name == "confirm-subset":
        return ConfirmSubset(tuple(_ints(params, None, name)))
    raise ValueError(f"unknown oracle {text!r}")


# ----------------------------------------------------------------- report


@dataclass
class DeviceReport:
    index: int
    handle: str
    role: str
    honest: bool
    state: str
    reason: str | None
    phase: str | None
    showed_lock: bool
    imported: bool
    roster_digest: str | None
    trace: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "handle": self.handle,
            "role": self.role,
            "honest": self.honest,
            "state": self.state,
            "reason": self.reason,
            "phase": self.phase,
            "showed_lock": self.showed_lock,
            "imported": self.imported,
            "roster_digest": self.roster_digest,
            "trace": list(self.trace),
        }


@dataclass
class SimReport:
    seed: int
    config: dict
    duration: float
    events: int
    devices: list[DeviceReport]
    violations: list[str]

    @property
    def honest(self) -> list[DeviceReport]:
        return [d for d in self.devices if d.honest]

    @property
    def finalized(self) -> int:
        return sum(1 for d in self.honest if d.state == "Finalized")

    @property
    def safe(self) -> bool:
        return not self.violations

    def reasons(self) -> Counter:
        return Counter(d.reason for d in self.honest if d.reason is not None)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "duration": round(self.duration, 6),
            "events": self.events,
            "violations": list(self.violations),
            "devices": [d.to_dict() for d in self.devices],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------- harness


@dataclass
class _Device:
    index: int
    handle: str
    honest: bool
    session: P.Session
    endpoint: object
    oob: object
    timer: tuple[float, str] | None = None
    consulted: bool = False
    showed_lock: bool = False
    imported: tuple[ContactCard, ...] | None = None
    trace: list = field(default_factory=list)
    notified: set = field(default_factory=set)


def make_card(rng: random.Random, index: int) -> ContactCard:
    return ContactCard(
        f"Device {index}",
        rng.randbytes(32),
        ((b"device", str(index).encode()),),
    )


def _describe(event: P.Event) -> str:
    if isinstance(event, P.MessageReceived):
        data = event.message
        kind = MsgType(data[4]).name if isinstance(data, bytes) and len(data) > 4 and data[4] < 8 else "?"
        return f"recv {kind} from {event.peer}"
    if isinstance(event, P.OobReceived):
        data = event.payload
        kind = {1: "INIT", 2: "VERIFY"}.get(data[0] if data else -1, "?")
        return f"oob {kind}"
    if isinstance(event, P.PeerConnected):
        return f"connected {event.peer}"
    if isinstance(event, P.UserConfirmed):
        return "user " + ("confirm" if event.accept else "decline")
    if isinstance(event, P.TimerFired):
        return f"timer {event.timer_id}"
    return type(event).__name__


def _describe_action(action: P.Action) -> str | None:
    if isinstance(action, P.Send):
        return f"send {action.message.type.name} to {action.peer}"
    if isinstance(action, P.Broadcast):
        return f"broadcast {action.message.type.name}"
    if isinstance(action, P.EmitOob):
        return "emit " + ("INIT" if isinstance(action.payload, P.OobInit) else "VERIFY")
    if isinstance(action, P.Connect):
        return f"connect {action.descriptor}"
    if isinstance(action, P.DisplayLock):
        return "display lock"
    if isinstance(action, P.DisplayAbort):
        return f"display abort {action.reason.label}"
    if isinstance(action, P.ImportContacts):
        return f"import {len(action.cards)} cards"
    return None


class _Sim:
    def __init__(self, n, adversary, oracle, seed, config, trace, max_events):
        if not 2 <= n <= 16:
            raise P.GroupSizeOutOfBounds(f"group size {n} outside [2, 16]")
        self.n = n
        self.adversary = adversary
        self.oracle = oracle
        self.seed = seed
        self.config = config
        self.want_trace = trace
        self.max_events = max_events
        self.events = 0
        modem = ModemConfig()
        self.net = SimNetwork(seed, oob_airtime=lambda data: modem.airtime(len(data)))
        parts = _parts(adversary)
        master = random.Random(seed)
        handles = [f"dev{i}" for i in range(n)]
        self.devices: list[_Device] = []
        self.pending: list[tuple[_Device, P.Event]] = []

        attacker = _Attacker(parts, handles, random.Random(master.getrandbits(64)))
        if attacker.parts:
            self.net.interpose = attacker.interpose
        self.net.oob_tamper = _oob_tamper(parts)

        startup = []
        specs = [(h, True) for h in handles]
        if any(isinstance(p, InjectExtraParticipant) for p in parts):
            specs.append(("intruder", False))
        for i, (handle, honest) in enumerate(specs):
            rng = random.Random(master.getrandbits(64))
            card = make_card(rng, i)
            if i == 0:
                session, actions = P.coordinator_new(config, n, card, rng)
            else:
                session, actions = P.participant_new(config, card, rng)
            dev = _Device(i, handle, honest, session, self.net.endpoint(handle), self.net.oob(handle))
            if i == 0:
                dev.endpoint.listen(config.descriptor)
            self.devices.append(dev)
            startup.append((dev, actions))
        # every listener must exist before the first OOB emission fans out
        for dev, actions in startup:
            self._perform(dev, actions)
        self.by_handle = {d.handle: d for d in self.devices}

    def _log(self, dev: _Device, text: str) -> None:
        if self.want_trace:
            dev.trace.append(f"{self.net.now:.4f} {text}")

    def _deliver(self, dev: _Device, event: P.Event) -> None:
        self.events += 1
        if self.events > self.max_events:
            raise NonQuiescent(f"event budget {self.max_events} exhausted at t={self.net.now:.3f}")
        if self.want_trace:
            self._log(dev, _describe(event))
        try:
            actions = dev.session.handle(event)
        except P.IgnoredEvent:
            self._log(dev, "ignored (terminal)")
            notice = P.straggler_notice(dev.session, event)
            if notice is not None and notice.peer not in dev.notified:
                dev.notified.add(notice.peer)
                self._perform(dev, [notice])
            return
        self._perform(dev, actions)

    def _perform(self, dev: _Device, actions: Iterable[P.Action]) -> None:
        for a in actions:
            if self.want_trace:
                text = _describe_action(a)
                if text:
                    self._log(dev, text)
            if isinstance(a, P.Send):
                dev.endpoint.send(a.peer, encode_message(a.message))
            elif isinstance(a, P.Broadcast):
                dev.endpoint.broadcast(encode_message(a.message))
            elif isinstance(a, P.EmitOob):
                dev.oob.emit(encode_oob(a.payload))
            elif isinstance(a, P.Connect):
                try:
                    dev.endpoint.connect(a.descriptor)
                except ConnectFailed:
                    # nothing to join: surfaces as the running round timing out
                    if dev.session.timer is not None:
                        self.pending.append((dev, P.TimerFired(dev.session.timer)))
            elif isinstance(a, P.SetTimer):
                dev.timer = (self.net.now + a.duration, a.timer_id)
            elif isinstance(a, P.CancelTimer):
                if dev.timer is not None and dev.timer[1] == a.timer_id:
                    dev.timer = None
            elif isinstance(a, P.DisplayLock):
                dev.showed_lock = True
            elif isinstance(a, P.ImportContacts):
                dev.imported = a.cards

    def _drain(self, dev: _Device) -> None:
        for peer in dev.endpoint.accept():
            self._deliver(dev, P.PeerConnected(peer))
        for peer, data in dev.endpoint.receive():
            self._deliver(dev, P.MessageReceived(peer, data))
        for data in dev.oob.poll():
            self._deliver(dev, P.OobReceived(data))

    def _consult(self) -> bool:
        group = [d for d in self.devices if d.honest]
        all_locked = all(d.showed_lock for d in group)
        asked = False
        for dev in self.devices:
            if dev.consulted or dev.session.state is not P.State.LOCKED:
                continue
            dev.consulted = True
            asked = True
            # the intruder's user plays along with whatever it is shown
            answer = True if not dev.honest else _answer(self.oracle, dev.index, all_locked)
            if answer is None:
                self._log(dev, "user waits")
                continue
            self._deliver(dev, P.UserConfirmed(answer))
        return asked

    def _fire_timer(self) -> bool:
        live = [d for d in self.devices if d.timer is not None and not d.session.terminal]
        if not live:
            return False
        dev = min(live, key=lambda d: (d.timer[0], d.index))
        deadline, timer_id = dev.timer
        dev.timer = None
        self.net.now = max(self.net.now, deadline)
        self._deliver(dev, P.TimerFired(timer_id))
        return True

    def run(self) -> SimReport:
        while True:
            while self.pending:
                dev, ev = self.pending.pop(0)
                self._deliver(dev, ev)
            handle = self.net.advance()
            if handle is not None:
                self._drain(self.by_handle[handle])
                continue
            if self.pending or self._consult():
                continue
            if not self._fire_timer():
                break
        return self._report()

    def _report(self) -> SimReport:
        devices = []
        for d in self.devices:
            s = d.session
            devices.append(
                DeviceReport(
                    index=d.index,
                    handle=d.handle,
                    role=s.role.value,
                    honest=d.honest,
                    state=s.state.value,
                    reason=s.abort_reason.label if s.abort_reason is not None else None,
                    phase=s.abort_phase.value if s.abort_phase is not None else None,
                    showed_lock=d.showed_lock,
                    imported=d.imported is not None,
                    roster_digest=roster_digest(d.imported).hex() if d.imported is not None else None,
                    trace=d.trace,
                )
            )
        config = {
            "devices": self.n,
            "adversary": adversary_name(self.adversary),
            "oracle": oracle_name(self.oracle),
            "round_timeout": self.config.round_timeout,
            "protocol_version": self.config.protocol_version,
            "descriptor": self.config.descriptor,
            "oob_digest_bytes": self.config.oob_digest_bytes,
        }
        report = SimReport(self.seed, config, self.net.now, self.events, devices, [])
        report.violations = _violations(self, report)
        return report


def _violations(sim: _Sim, report: SimReport) -> list[str]:
    out = []
    honest = [d for d in sim.devices if d.honest]
    done = [d for d in honest if d.session.state is P.State.FINALIZED]
    if done and is_substitution(sim.adversary):
        out.append(f"{len(done)} honest device(s) finalized under {adversary_name(sim.adversary)}")
    digests = {r.roster_digest for r in report.honest if r.imported}
    if len(digests) > 1:
        out.append("honest devices imported different rosters")
    genuine = sorted(encode_card_key(d.session.card) for d in honest)
    for d in honest:
        if d.imported is not None and sorted(encode_card_key(c) for c in d.imported) != genuine:
            out.append(f"{d.handle} imported cards other than the group's")
    imported = [d.imported is not None for d in honest]
    if any(imported) and not all(imported):
        out.append("partial import: some honest devices imported and others did not")
    return out


def encode_card_key(card: ContactCard) -> tuple:
    return (card.name, card.public_key, card.extensions)


def run_simulation(
    n: int,
    adversary: Adversary = NoAdversary(),
    oracle: UserOracle = Honest(),
    seed: int = 0,
    config: P.ProtocolConfig | None = None,
    *,
    trace: bool = True,
    max_events: int = 200_000,
) -> SimReport:
    """Run one pairing to quiescence and report every device's outcome."""
    sim = _Sim(n, adversary, oracle, seed, config or P.ProtocolConfig(), trace, max_events)
    return sim.run()


# ----------------------------------------------------------------- matrix


@dataclass(frozen=True)
class Scenario:
    n: int
    adversary: Adversary = NoAdversary()
    oracle: UserOracle = Honest()
    config: P.ProtocolConfig = field(default_factory=P.ProtocolConfig)

    @property
    def name(self) -> str:
        return f"n={self.n} {adversary_name(self.adversary)} {oracle_name(self.oracle)}"


@dataclass
class MatrixRow:
    scenario: Scenario
    runs: int = 0
    honest_devices: int = 0
    finalized: int = 0
    reasons: Counter = field(default_factory=Counter)
    unexpected: int = 0
    violations: list[tuple[int, str]] = field(default_factory=list)

    @property
    def finalization_rate(self) -> float:
        return self.finalized / self.honest_devices if self.honest_devices else 0.0


@dataclass
class MatrixSummary:
    rows: list[MatrixRow]

    @property
    def ok(self) -> bool:
        return not any(r.violations for r in self.rows)

    def table(self) -> str:
        lines = [f"{'scenario':44} {'runs':>5} {'final%':>7} {'unexp':>5} {'viol':>4}  reasons"]
        for r in self.rows:
            reasons = ", ".join(f"{k}={v}" for k, v in sorted(r.reasons.items()))
            lines.append(
                f"{r.scenario.name:44} {r.runs:5d} {100 * r.finalization_rate:6.1f}% "
                f"{r.unexpected:5d} {len(r.violations):4d}  {reasons}"
            )
        return "\n".join(lines)


def run_matrix(scenarios: Sequence[Scenario], seeds: Iterable[int]) -> MatrixSummary:
    scenarios = list(scenarios)
    seeds = list(seeds)
    if not scenarios or not seeds:
        raise ValueError("need at least one scenario and one seed")
    rows = []
    for sc in scenarios:
        row = MatrixRow(sc)
        allowed = expected_reasons(sc.adversary)
        for seed in seeds:
            rep = run_simulation(sc.n, sc.adversary, sc.oracle, seed, sc.config, trace=False)
            row.runs += 1
            for d in rep.honest:
                row.honest_devices += 1
                if d.state == "Finalized":
                    row.finalized += 1
                else:
                    row.reasons[d.reason] += 1
                    if allowed is not None and AbortReason[d.reason.upper().replace("-", "_")] not in allowed:
                        row.unexpected += 1
            row.violations.extend((seed, v) for v in rep.violations)
        rows.append(row)
    return MatrixSummary(rows)
