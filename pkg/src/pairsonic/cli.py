"""``pairsonic`` command line: simulation, modem tooling and live pairing.

Exit codes are stable: 0 success, 1 runtime error (or nothing decoded),
2 usage error, 3 timeout, 4 integrity failure or OOB mismatch,
5 declined by a user.  ``simulate`` exits 0 whenever no safety property was
violated, so a detected attack that ends in aborts is a success.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import secrets
import sys
import time
from collections import deque
from pathlib import Path
from typing import Sequence

from . import protocol as P
from . import wire
from .modem import (
    AWGN,
    Band,
    ModemConfig,
    ModemError,
    Pad,
    demodulate,
    impair,
    modulate,
    wav_read,
    wav_write,
)
from .transports import ConnectFailed, FileOobChannel, PeerDisconnected, TcpChannel, TransportError

log = logging.getLogger("pairsonic")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3
EXIT_INTEGRITY = 4
EXIT_DECLINED = 5

REASON_EXIT = {
    wire.AbortReason.TIMEOUT: EXIT_TIMEOUT,
    wire.AbortReason.INTEGRITY_FAILURE: EXIT_INTEGRITY,
    wire.AbortReason.OOB_MISMATCH: EXIT_INTEGRITY,
    wire.AbortReason.USER_DECLINED: EXIT_DECLINED,
}


class UsageError(Exception):
    pass


# ------------------------------------------------------------ config


CONFIG_KEYS = {"band", "symbol_duration_ms", "rs_parity_bytes", "round_timeout", "amplitude", "oob_digest_bytes"}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _merged(args: argparse.Namespace, key: str, default):
    """Flag value if given, else config-file value, else the default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return args.config_values.get(key, default)


def modem_config(args: argparse.Namespace) -> ModemConfig:
    try:
        return ModemConfig(
            band=Band.parse(str(_merged(args, "band", "audible"))),
            symbol_duration_ms=float(_merged(args, "symbol_duration_ms", 64.0)),
            rs_parity_bytes=int(_merged(args, "rs_parity_bytes", 8)),
            amplitude=float(_merged(args, "amplitude", 0.5)),
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid modem settings: {exc}") from None


def protocol_config(args: argparse.Namespace, descriptor: str = "sim:local") -> P.ProtocolConfig:
    try:
        return P.ProtocolConfig(
            round_timeout=float(_merged(args, "round_timeout", 30.0)),
            descriptor=descriptor,
            oob_digest_bytes=int(_merged(args, "oob_digest_bytes", wire.DIGEST_SIZE)),
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid protocol settings: {exc}") from None


# ------------------------------------------------------------- cards


def card_from_json(data: dict) -> wire.ContactCard:
    try:
        exts = []
        for k, v in (data.get("extensions") or {}).items():
            value = bytes.fromhex(v["hex"]) if isinstance(v, dict) else str(v).encode("utf-8")
            exts.append((k.encode("utf-8"), value))
        return wire.ContactCard(str(data["name"]), bytes.fromhex(data["public_key"]), tuple(exts))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise UsageError(f"bad contact card: {exc}") from None


def card_to_json(card: wire.ContactCard) -> dict:
    exts = {}
    for k, v in card.extensions:
        try:
            exts[k.decode("utf-8")] = v.decode("utf-8")
        except UnicodeDecodeError:
            exts[k.decode("utf-8", "backslashreplace")] = {"hex": v.hex()}
    return {"name": card.name, "public_key": card.public_key.hex(), "extensions": exts}


def read_card(path: str) -> wire.ContactCard:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read contact card {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: contact card must be a JSON object")
    return card_from_json(data)


def select_imports(cards: Sequence[wire.ContactCard], spec: str | None, interactive: bool) -> list[wire.ContactCard]:
    if spec is None and interactive:
        spec = input("Import which contacts? [all / none / comma-separated numbers] ").strip() or "all"
    if spec is None or spec == "all":
        return list(cards)
    if spec == "none":
        return []
    try:
        picks = sorted({int(t) for t in spec.split(",") if t.strip()})
    except ValueError:
        raise UsageError(f"--import expects all, none or indices, got {spec!r}") from None
    if any(not 0 <= i < len(cards) for i in picks):
        raise UsageError(f"--import index out of range 0-{len(cards) - 1}")
    return [cards[i] for i in picks]


# ---------------------------------------------------------- simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    from . import sim

    if not 2 <= args.devices <= 16:
        raise UsageError("--devices must be between 2 and 16")
    try:
        adversary = sim.parse_adversary(args.adversary)
        oracle = sim.parse_oracle(args.oracle)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = protocol_config(args)
    if args.runs > 1:
        summary = sim.run_matrix([sim.Scenario(args.devices, adversary, oracle, config)],
                                 range(args.seed, args.seed + args.runs))
        print(summary.table())
        if args.report:
            Path(args.report).write_text(summary.table() + "\n", encoding="utf-8")
        return EXIT_OK if summary.ok else EXIT_ERROR
    report = sim.run_simulation(args.devices, adversary, oracle, args.seed, config)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    for d in report.devices:
        tag = "" if d.honest else " (intruder)"
        outcome = d.state if d.reason is None else f"{d.state} ({d.reason}, {d.phase})"
        print(f"{d.handle}{tag}: {outcome}")
    print(f"finalized {report.finalized}/{len(report.honest)} in {report.duration:.3f} s virtual time")
    for v in report.violations:
        print(f"SAFETY VIOLATION: {v}")
    return EXIT_OK if report.safe else EXIT_ERROR


# ------------------------------------------------------------- modem


def cmd_modem_encode(args: argparse.Namespace) -> int:
    cfg = modem_config(args)
    payload = Path(args.input).read_bytes()
    wav_write(args.output, modulate(cfg, payload))
    print(f"wrote {args.output}: {len(payload)} bytes, {cfg.airtime(len(payload)):.3f} s")
    return EXIT_OK


def cmd_modem_decode(args: argparse.Namespace) -> int:
    cfg = modem_config(args)
    frames = demodulate(cfg, wav_read(args.input))
    for payload, _ in frames:
        print(payload.hex())
    return EXIT_OK if frames else EXIT_ERROR


def cmd_modem_impair(args: argparse.Namespace) -> int:
    pcm = wav_read(args.input)
    chain = []
    if args.pad is not None:
        chain.append(Pad(args.pad, args.pad))
    if args.snr is not None:
        chain.append(AWGN(args.snr))
    wav_write(args.output, impair(pcm, chain, seed=args.seed))
    return EXIT_OK


# -------------------------------------------------------------- pair


class _Driver:
    """Runs one session over TCP + WAV-file OOB until it terminates."""

    def __init__(self, session: P.Session, channel: TcpChannel, oob: FileOobChannel, args: argparse.Namespace):
        self.session = session
        self.channel = channel
        self.oob = oob
        self.args = args
        self.timer: tuple[float, str] | None = None
        self.imported: list[wire.ContactCard] | None = None
        self.notified: set = set()
        self.queue: deque[P.Event] = deque()
        self.busy = False

    def feed(self, event: P.Event) -> None:
        """Queue an event; events raised while acting wait for the current
        action list to finish, so timers are never applied out of order."""
        self.queue.append(event)
        if self.busy:
            return
        self.busy = True
        try:
            while self.queue:
                self._handle(self.queue.popleft())
        finally:
            self.busy = False

    def _handle(self, event: P.Event) -> None:
        try:
            actions = self.session.handle(event)
        except P.IgnoredEvent:
            notice = P.straggler_notice(self.session, event)
            if notice is not None and notice.peer not in self.notified:
                self.notified.add(notice.peer)
                self.perform([notice])
            return
        self.perform(actions)

    def perform(self, actions: Sequence[P.Action]) -> None:
        for a in actions:
            try:
                self._perform_one(a)
            except PeerDisconnected as exc:
                log.warning("send failed: %s", exc)

    def _perform_one(self, a: P.Action) -> None:
        if isinstance(a, P.Send):
            self.channel.send(a.peer, wire.encode_message(a.message))
        elif isinstance(a, P.Broadcast):
            data = wire.encode_message(a.message)
            for peer in getattr(self.session, "peers", []):
                try:
                    self.channel.send(peer, data)
                except PeerDisconnected as exc:
                    log.warning("broadcast to %s failed: %s", peer, exc)
        elif isinstance(a, P.EmitOob):
            path = self.oob.emit(wire.encode_oob(a.payload))
            log.info("emitted %s", path.name)
        elif isinstance(a, P.Connect):
            try:
                peer = self.channel.connect(a.descriptor)
            except (ConnectFailed, TransportError) as exc:
                print(f"cannot join {a.descriptor}: {exc}", file=sys.stderr)
                if self.session.timer is not None:
                    self.feed(P.TimerFired(self.session.timer))
                return
            self.feed(P.PeerConnected(peer))
        elif isinstance(a, P.SetTimer):
            self.timer = (time.monotonic() + a.duration, a.timer_id)
        elif isinstance(a, P.CancelTimer):
            if self.timer is not None and self.timer[1] == a.timer_id:
                self.timer = None
        elif isinstance(a, P.DisplayLock):
            print(f"[LOCK] verified {self.session.group_size} commitments; compare the lock on every device")
            sys.stdout.flush()
            self.feed(P.UserConfirmed(self._ask_lock()))
        elif isinstance(a, P.DisplayContacts):
            print("received contacts:")
            for i, card in enumerate(a.cards):
                own = "  (you)" if card == self.session.card else ""
                print(f"  [{i}] {card.name}  key {card.fingerprint}{own}")
        elif isinstance(a, P.DisplayAbort):
            print(f"[ABORTED] {a.reason.label}")
        elif isinstance(a, P.ImportContacts):
            interactive = not self.args.auto_confirm and sys.stdin.isatty()
            self.imported = select_imports(a.cards, self.args.import_spec, interactive)

    def _ask_lock(self) -> bool:
        if self.args.auto_confirm:
            return True
        try:
            answer = input(f"All {self.session.group_size} devices show the lock? [y/n] ")
        except EOFError:
            return False
        return answer.strip().lower() in ("y", "yes")

    def _receive(self, wait: float) -> None:
        item = self.channel.receive(timeout=wait)
        if item is None:
            return
        # a peer is listed as accepted before its reader starts, so draining
        # accept() here guarantees PeerConnected precedes its first message
        for peer in self.channel.accept():
            self.feed(P.PeerConnected(peer))
        self.feed(P.MessageReceived(*item))

    def poll_once(self, wait: float) -> None:
        for peer in self.channel.accept():
            self.feed(P.PeerConnected(peer))
        for payload in self.oob.poll():
            if self.session.terminal:
                break
            self.feed(P.OobReceived(payload))
        self._receive(wait)
        for peer in self.channel.disconnected():
            # a lost link is left to the running round timer
            log.info("peer %s disconnected", peer)
        if self.timer is not None and time.monotonic() >= self.timer[0] and not self.session.terminal:
            _, timer_id = self.timer
            self.timer = None
            self.feed(P.TimerFired(timer_id))

    def run(self, actions: Sequence[P.Action]) -> int:
        self.busy = True
        self.perform(actions)
        self.busy = False
        if self.queue:
            self.feed(self.queue.popleft())
        while not self.session.terminal:
            self.poll_once(self.args.poll_interval)
        self._linger()
        return self._finish()

    def _linger(self) -> None:
        """Give peers a moment to drain before the sockets close."""
        if not isinstance(self.session, P.CoordinatorSession):
            return
        deadline = time.monotonic() + self.args.linger
        live = set(self.session.peers)
        while live and time.monotonic() < deadline:
            live -= set(self.channel.disconnected())
            self._receive(0.05)

    def _finish(self) -> int:
        outcome = P.session_outcome(self.session)
        if isinstance(outcome, P.Aborted):
            detail = f" ({self.session.abort_detail})" if self.session.abort_detail else ""
            print(f"pairing aborted: {outcome.reason.label} during {outcome.phase.value.lower()}{detail}")
            return REASON_EXIT[outcome.reason]
        chosen = self.imported if self.imported is not None else list(outcome.cards)
        if self.args.out:
            Path(self.args.out).write_text(json.dumps([card_to_json(c) for c in chosen], indent=2) + "\n",
                                           encoding="utf-8")
        print(f"imported {len(chosen)} of {len(outcome.cards)} contacts")
        return EXIT_OK


def _session_rng(args: argparse.Namespace):
    return random.Random(args.seed) if args.seed is not None else secrets.SystemRandom()


def _oob_channel(args: argparse.Namespace) -> FileOobChannel:
    emit = args.oob_emit_dir or args.oob_dir
    listen = args.oob_listen_dir or args.oob_dir
    if emit is None or listen is None:
        raise UsageError("--oob-dir (or both --oob-emit-dir and --oob-listen-dir) is required")
    return FileOobChannel(emit, modem_config(args), listen_dir=listen)


def cmd_pair_coordinate(args: argparse.Namespace) -> int:
    if not 2 <= args.group_size <= 16:
        raise UsageError("--group-size must be between 2 and 16")
    card = read_card(args.contact)
    oob = _oob_channel(args)
    with TcpChannel.listen(args.listen) as channel:
        config = protocol_config(args, descriptor=channel.descriptor)
        session, actions = P.coordinator_new(config, args.group_size, card, _session_rng(args))
        print(f"coordinating a group of {args.group_size} on {channel.descriptor}")
        return _Driver(session, channel, oob, args).run(actions)


def cmd_pair_join(args: argparse.Namespace) -> int:
    card = read_card(args.contact)
    oob = _oob_channel(args)
    with TcpChannel() as channel:
        session, actions = P.participant_new(protocol_config(args), card, _session_rng(args))
        print("listening for the coordinator's announcement")
        return _Driver(session, channel, oob, args).run(actions)


# ------------------------------------------------------------ parser


def _add_modem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--band", choices=["audible", "ultrasonic"], default=None)
    p.add_argument("--symbol-ms", dest="symbol_duration_ms", type=float, default=None)
    p.add_argument("--parity", dest="rs_parity_bytes", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairsonic", description="Group pairing over sound.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--config", help="JSON file with band, symbol_duration_ms, rs_parity_bytes, round_timeout")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the protocol in the deterministic simulator")
    s.add_argument("--devices", type=int, default=3)
    s.add_argument("--adversary", default="none",
                   help="none, flip-bit:ORD:BIT, substitute-commit:V, substitute-reveal:V, split-roster[:I,J], "
                        "inject-extra, drop:ORD, suppress-aborts, tamper-oob:BIT; join with +")
    s.add_argument("--oracle", default="honest", help="honest, always-confirm, always-decline, confirm-subset:I,J")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--runs", type=int, default=1, help="run seeds SEED..SEED+RUNS-1 and print a summary")
    s.add_argument("--report", help="write the report here")
    s.add_argument("--timeout", dest="round_timeout", type=float, default=None)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("modem", help="acoustic modem tools").add_subparsers(dest="modem_command", required=True)
    e = m.add_parser("encode", help="modulate a payload file into a WAV")
    _add_modem_flags(e)
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--out", dest="output", required=True)
    e.set_defaults(func=cmd_modem_encode)
    d = m.add_parser("decode", help="print every payload found in a WAV as hex")
    _add_modem_flags(d)
    d.add_argument("--in", dest="input", required=True)
    d.set_defaults(func=cmd_modem_decode)
    i = m.add_parser("impair", help="add noise (and optional padding) to a WAV")
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--out", dest="output", required=True)
    i.add_argument("--snr", type=float, default=None, help="AWGN at this SNR in dB")
    i.add_argument("--pad", type=float, default=None, help="random silence up to this many seconds each side")
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(func=cmd_modem_impair)

    pair = sub.add_parser("pair", help="pair for real over TCP and WAV files")
    psub = pair.add_subparsers(dest="pair_command", required=True)
    for name, func in (("coordinate", cmd_pair_coordinate), ("join", cmd_pair_join)):
        p = psub.add_parser(name)
        p.add_argument("--contact", required=True, help="JSON card: name, public_key (hex), extensions")
        p.add_argument("--oob-dir", default=None, help="shared directory for OOB WAV files")
        p.add_argument("--oob-emit-dir", default=None, help=argparse.SUPPRESS)
        p.add_argument("--oob-listen-dir", default=None, help=argparse.SUPPRESS)
        p.add_argument("--auto-confirm", action="store_true", help="accept the lock without prompting")
        p.add_argument("--import", dest="import_spec", default=None, help="all, none or indices like 0,2")
        p.add_argument("--out", default=None, help="write imported contacts here (JSON)")
        p.add_argument("--timeout", dest="round_timeout", type=float, default=None)
        p.add_argument("--seed", type=int, default=None, help="deterministic nonces (testing only)")
        p.add_argument("--poll-interval", type=float, default=0.05, help=argparse.SUPPRESS)
        p.add_argument("--linger", type=float, default=2.0, help=argparse.SUPPRESS)
        _add_modem_flags(p)
        if name == "coordinate":
            p.add_argument("--group-size", type=int, required=True)
            p.add_argument("--listen", default="tcp:127.0.0.1:0")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.config_values = load_config(args.config)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pairsonic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModemError, wire.WireError, TransportError, OSError) as exc:
        print(f"pairsonic: {exc}", file=sys.stderr)
        return EXIT_ERROR
