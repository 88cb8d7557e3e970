"""In-band and out-of-band channels for simulated and real runs.

Two in-band flavours share one poll-style interface (``connect``, ``accept``,
``send``, ``broadcast``, ``receive``): an in-memory network driven by a
virtual clock, and TCP with u32 big-endian length-prefixed frames.  The OOB
side is either the simulated authentic broadcast or a directory of numbered
WAV files carrying modulated payloads.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import os
import queue
import random
import re
import socket
import struct
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .modem import ModemConfig, ModemError, demodulate, modulate, wav_read, wav_write
from .wire import MAX_DESCRIPTOR

log = logging.getLogger(__name__)


class TransportError(Exception):
    pass


class BadDescriptor(TransportError, ValueError):
    pass


class ConnectFailed(TransportError):
    pass


class PeerDisconnected(TransportError):
    pass


def parse_descriptor(descriptor: str) -> tuple[str, str]:
    """Split ``scheme:rest`` and validate the size limit."""
    if len(descriptor.encode("utf-8")) > MAX_DESCRIPTOR:
        raise BadDescriptor(f"descriptor longer than {MAX_DESCRIPTOR} bytes")
    scheme, sep, rest = descriptor.partition(":")
    if not sep or scheme not in ("tcp", "sim") or not rest:
        raise BadDescriptor(f"unparseable descriptor {descriptor!r}")
    return scheme, rest


def parse_tcp(descriptor: str) -> tuple[str, int]:
    scheme, rest = parse_descriptor(descriptor)
    host, sep, port = rest.rpartition(":")
    if scheme != "tcp" or not sep or not host or not port.isdigit() or not 0 <= int(port) < 65536:
        raise BadDescriptor(f"expected tcp:<host>:<port>, got {descriptor!r}")
    return host, int(port)


# ------------------------------------------------------------------ sim


@dataclass(frozen=True)
class Envelope:
    """One in-band unicast as the adversary sees it."""

    ordinal: int
    src: str
    dst: str
    data: bytes


Interposer = Callable[[Envelope], Sequence[Envelope]]
OobTamper = Callable[[bytes], bytes]


@dataclass(order=True)
class _Pending:
    time: float
    seq: int
    kind: str = field(compare=False)  # "connect", "msg" or "oob"
    src: str = field(compare=False)
    dst: str = field(compare=False)
    data: bytes = field(compare=False, default=b"")


class SimNetwork:
    """Seeded in-memory network with a virtual clock.

    Every unicast gets a random latency, but deliveries on one (sender,
    receiver) pair never overtake each other.  ``interpose`` sees each
    unicast before it is queued and returns what should actually be
    delivered; ``oob_tamper`` sees each OOB emission once, before it fans
    out to every listener, so the broadcast stays equivocation-free.
    """

    def __init__(
        self,
        seed: int,
        latency: tuple[float, float] = (0.002, 0.030),
        oob_airtime: Callable[[bytes], float] | None = None,
    ):
        self.rng = random.Random(seed)
        self.latency = latency
        self.oob_airtime = oob_airtime or (lambda data: 0.0)
        self.now = 0.0
        self.interpose: Interposer | None = None
        self.oob_tamper: OobTamper | None = None
        self._queue: list[_Pending] = []
        self._seq = itertools.count()
        self._pair_clock: dict[tuple[str, str], float] = {}
        self._ordinal = itertools.count()
        self._endpoints: dict[str, SimEndpoint] = {}
        self._oob: dict[str, SimOob] = {}
        self._services: dict[str, str] = {}
        self.trace: list[tuple[float, str, str, str, bytes]] = []

    def endpoint(self, handle: str) -> SimEndpoint:
        if handle in self._endpoints:
            raise ValueError(f"duplicate endpoint {handle!r}")
        ep = SimEndpoint(self, handle)
        self._endpoints[handle] = ep
        return ep

    def oob(self, handle: str) -> SimOob:
        o = SimOob(self, handle)
        self._oob[handle] = o
        return o

    # -- scheduling

    def _schedule(self, kind: str, src: str, dst: str, data: bytes = b"", delay: float | None = None) -> None:
        if delay is None:
            delay = self.rng.uniform(*self.latency)
        t = self.now + delay
        if kind != "oob":
            # per-pair FIFO: equal times fall back to the sequence number
            t = max(t, self._pair_clock.get((src, dst), 0.0))
            self._pair_clock[(src, dst)] = t
        heapq.heappush(self._queue, _Pending(t, next(self._seq), kind, src, dst, data))

    def _unicast(self, src: str, dst: str, data: bytes) -> None:
        env = Envelope(next(self._ordinal), src, dst, bytes(data))
        out = self.interpose(env) if self.interpose else (env,)
        for e in out:
            if e.dst in self._endpoints:
                self._schedule("msg", e.src, e.dst, e.data)

    def _oob_emit(self, src: str, data: bytes) -> None:
        data = bytes(data)
        if self.oob_tamper is not None:
            data = self.oob_tamper(data)
        delay = self.oob_airtime(data)
        for handle in self._oob:
            self._schedule("oob", src, handle, data, delay)

    def pending(self) -> int:
        return len(self._queue)

    def advance(self) -> str | None:
        """Deliver the next queued item; returns the receiving handle."""
        if not self._queue:
            return None
        p = heapq.heappop(self._queue)
        self.now = max(self.now, p.time)
        self.trace.append((p.time, p.kind, p.src, p.dst, p.data))
        if p.kind == "oob":
            self._oob[p.dst]._inbox.append(p.data)
        elif p.kind == "connect":
            self._endpoints[p.dst]._accepted.append(p.src)
        else:
            self._endpoints[p.dst]._inbox.append((p.src, p.data))
        return p.dst


class SimEndpoint:
    def __init__(self, network: SimNetwork, handle: str):
        self.net = network
        self.handle = handle
        self.peers: list[str] = []
        self._inbox: list[tuple[str, bytes]] = []
        self._accepted: list[str] = []

    def listen(self, descriptor: str) -> None:
        parse_descriptor(descriptor)
        self.net._services[descriptor] = self.handle

    def connect(self, descriptor: str) -> str:
        server = self.net._services.get(descriptor)
        if server is None:
            raise ConnectFailed(f"nothing listening on {descriptor}")
        # each side learns of the link through its own FIFO, so the server
        # sees the connection before any data the client sends on it
        self.net._schedule("connect", self.handle, server)
        self.net._schedule("connect", server, self.handle)
        return server

    def accept(self) -> list[str]:
        new, self._accepted = self._accepted, []
        for h in new:
            if h not in self.peers:
                self.peers.append(h)
        return new

    def send(self, peer: str, data: bytes) -> None:
        self.net._unicast(self.handle, peer, data)

    def broadcast(self, data: bytes) -> None:
        for p in self.peers:
            self.send(p, data)

    def receive(self) -> list[tuple[str, bytes]]:
        out, self._inbox = self._inbox, []
        return out


class SimOob:
    def __init__(self, network: SimNetwork, handle: str):
        self.net = network
        self.handle = handle
        self._inbox: list[bytes] = []

    def emit(self, payload: bytes) -> None:
        self.net._oob_emit(self.handle, payload)

    def poll(self) -> list[bytes]:
        out, self._inbox = self._inbox, []
        return out


def sim_network_new(seed: int, **kwargs) -> SimNetwork:
    return SimNetwork(seed, **kwargs)


# ------------------------------------------------------------------ tcp

_LEN = struct.Struct(">I")
MAX_FRAME = 1 << 20


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


class TcpChannel:
    """Length-prefixed TCP messaging with a poll interface.

    Reader threads push frames into a single queue; the protocol thread
    drains it with :meth:`receive`.  Peers are named ``host:port`` of the
    remote socket.
    """

    def __init__(self) -> None:
        self._inbox: queue.Queue = queue.Queue()
        self._socks: dict[str, socket.socket] = {}
        self._lock = threading.Lock()
        self._accepted: list[str] = []
        self._dropped: list[str] = []
        self._server: socket.socket | None = None
        self._closed = threading.Event()
        self.address: tuple[str, int] | None = None

    @property
    def descriptor(self) -> str:
        if self.address is None:
            raise TransportError("channel is not listening")
        return f"tcp:{self.address[0]}:{self.address[1]}"

    @classmethod
    def listen(cls, descriptor: str = "tcp:127.0.0.1:0") -> TcpChannel:
        host, port = parse_tcp(descriptor)
        ch = cls()
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen()
        ch._server = srv
        ch.address = srv.getsockname()[:2]
        threading.Thread(target=ch._accept_loop, daemon=True).start()
        return ch

    def _accept_loop(self) -> None:
        assert self._server is not None
        while not self._closed.is_set():
            try:
                conn, addr = self._server.accept()
            except OSError:
                return
            handle = f"{addr[0]}:{addr[1]}"
            # announce the peer before its reader can queue any message
            with self._lock:
                self._accepted.append(handle)
            self._register(handle, conn)

    def _register(self, handle: str, sock: socket.socket) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        with self._lock:
            self._socks[handle] = sock
        threading.Thread(target=self._read_loop, args=(handle, sock), daemon=True).start()

    def _read_loop(self, handle: str, sock: socket.socket) -> None:
        try:
            while True:
                head = _recv_exact(sock, 4)
                if head is None:
                    break
                (n,) = _LEN.unpack(head)
                if n > MAX_FRAME:
                    log.warning("peer %s sent oversized frame (%d bytes), dropping link", handle, n)
                    break
                body = _recv_exact(sock, n)
                if body is None:
                    break
                self._inbox.put((handle, body))
        except OSError:
            pass
        with self._lock:
            self._socks.pop(handle, None)
            if not self._closed.is_set():
                self._dropped.append(handle)

    def connect(self, descriptor: str, timeout: float = 5.0) -> str:
        host, port = parse_tcp(descriptor)
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectFailed(f"{descriptor}: {exc}") from None
        sock.settimeout(None)
        handle = f"{host}:{port}"
        self._register(handle, sock)
        return handle

    def accept(self) -> list[str]:
        with self._lock:
            new, self._accepted = self._accepted, []
        return new

    def disconnected(self) -> list[str]:
        with self._lock:
            gone, self._dropped = self._dropped, []
        return gone

    def send(self, peer: str, data: bytes) -> None:
        with self._lock:
            sock = self._socks.get(peer)
        if sock is None:
            raise PeerDisconnected(f"no live connection to {peer}")
        try:
            sock.sendall(_LEN.pack(len(data)) + bytes(data))
        except OSError as exc:
            raise PeerDisconnected(f"{peer}: {exc}") from None

    def broadcast(self, data: bytes) -> None:
        with self._lock:
            peers = list(self._socks)
        for p in peers:
            self.send(p, data)

    def receive(self, timeout: float | None = 0.0) -> tuple[str, bytes] | None:
        try:
            if timeout is not None and timeout <= 0:
                return self._inbox.get_nowait()
            return self._inbox.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        self._closed.set()
        if self._server is not None:
            # close() alone leaves a thread blocked in accept() holding the
            # listening socket open; shutdown wakes it
            try:
                self._server.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._server.close()
        with self._lock:
            socks, self._socks = list(self._socks.values()), {}
        for s in socks:
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()

    def __enter__(self) -> TcpChannel:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def tcp_channel(descriptor: str) -> TcpChannel:
    """Listening channel bound to ``descriptor`` (port 0 picks a free port)."""
    return TcpChannel.listen(descriptor)


# ------------------------------------------------------------ file OOB

_WAV_NAME = re.compile(r"^oob-(\d{4,})\.wav$")


class FileOobChannel:
    """OOB broadcast through modulated WAV files in a shared directory.

    ``emit`` writes the next ``oob-NNNN.wav`` atomically; ``poll`` reads the
    files it has not seen yet, in name order, and returns every payload the
    demodulator recovers.  Unreadable files are skipped with a warning
    unless ``strict`` is set.  Emission and listening normally share one
    directory; they can be split so that something can sit in between.
    """

    def __init__(
        self,
        directory: str | Path,
        config: ModemConfig | None = None,
        listen_dir: str | Path | None = None,
        strict: bool = False,
    ):
        self.emit_dir = Path(directory)
        self.listen_dir = Path(listen_dir) if listen_dir is not None else self.emit_dir
        self.config = config or ModemConfig()
        self.strict = strict
        self._seen: set[str] = set()
        self.emit_dir.mkdir(parents=True, exist_ok=True)
        self.listen_dir.mkdir(parents=True, exist_ok=True)

    def _next_index(self) -> int:
        used = [int(m.group(1)) for p in self.emit_dir.iterdir() if (m := _WAV_NAME.match(p.name))]
        return max(used, default=0) + 1

    def emit(self, payload: bytes) -> Path:
        pcm = modulate(self.config, payload)
        target = self.emit_dir / f"oob-{self._next_index():04d}.wav"
        fd, tmp = tempfile.mkstemp(prefix=".oob-", suffix=".tmp", dir=self.emit_dir)
        os.close(fd)
        try:
            wav_write(tmp, pcm)
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return target

    def poll(self) -> list[bytes]:
        names = sorted(
            (p.name for p in self.listen_dir.iterdir() if _WAV_NAME.match(p.name) and p.name not in self._seen),
            key=lambda name: int(_WAV_NAME.match(name).group(1)),
        )
        out: list[bytes] = []
        for name in names:
            self._seen.add(name)
            try:
                pcm = wav_read(self.listen_dir / name)
                frames = demodulate(self.config, pcm)
            except ModemError as exc:
                if self.strict:
                    raise
                log.warning("skipping %s: %s", name, exc)
                continue
            if not frames:
                log.warning("no decodable frame in %s", name)
            out.extend(payload for payload, _ in frames)
        return out


def file_oob_channel(directory: str | Path, config: ModemConfig | None = None) -> FileOobChannel:
    return FileOobChannel(directory, config)
