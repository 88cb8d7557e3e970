from __future__ import annotations

import json
import subprocess
import sys
import time
from dataclasses import replace

import pytest

from pairsonic import wire
from pairsonic.cli import card_to_json
from pairsonic.modem import Band, ModemConfig, ModemError, UnsupportedWav
from pairsonic.transports import (
    BadDescriptor,
    ConnectFailed,
    FileOobChannel,
    PeerDisconnected,
    TcpChannel,
    parse_descriptor,
    parse_tcp,
    sim_network_new,
)

from .conftest import _make_card

# ------------------------------------------------------------- descriptors


def test_descriptor_parsing():
    assert parse_descriptor("sim:room") == ("sim", "room")
    assert parse_tcp("tcp:192.168.49.1:7465") == ("192.168.49.1", 7465)
    for bad in ("", "tcp", "udp:1.2.3.4:5", "tcp:host", "tcp::80", "tcp:h:99999", "sim:" + "x" * 64):
        with pytest.raises(BadDescriptor):
            parse_tcp(bad) if bad.startswith("tcp") else parse_descriptor(bad)


# --------------------------------------------------------------------- sim


def _star(seed: int, n: int = 3):
    net = sim_network_new(seed)
    hub = net.endpoint("c")
    hub.listen("sim:room")
    spokes = [net.endpoint(f"p{i}") for i in range(1, n)]
    for s in spokes:
        assert s.connect("sim:room") == "c"
    return net, hub, spokes


def _drain(net):
    order = []
    while (h := net.advance()) is not None:
        order.append(h)
    return order


def test_sim_connect_notices_both_sides():
    net, hub, spokes = _star(1)
    _drain(net)
    assert sorted(hub.accept()) == ["p1", "p2"]
    assert spokes[0].accept() == ["c"]
    with pytest.raises(ConnectFailed):
        net.endpoint("x").connect("sim:nowhere")


def test_sim_is_deterministic():
    def run(seed):
        net, hub, spokes = _star(seed)
        _drain(net)
        hub.accept()
        for k in range(5):
            hub.broadcast(bytes([k]))
            spokes[k % 2].send("c", bytes([100 + k]))
        _drain(net)
        return [(round(t, 9), kind, s, d, data) for t, kind, s, d, data in net.trace]

    assert run(3) == run(3)
    assert run(3) != run(4)


def test_sim_per_pair_fifo():
    net, hub, spokes = _star(7)
    _drain(net)
    hub.accept()
    for k in range(50):
        spokes[0].send("c", k.to_bytes(2, "big"))
    _drain(net)
    got = [int.from_bytes(d, "big") for _, d in hub.receive()]
    assert got == list(range(50))
    times = [t for t, kind, s, _, _ in net.trace if kind == "msg"]
    assert times == sorted(times)


def test_sim_connect_precedes_data():
    net = sim_network_new(0, latency=(0.0, 0.5))
    hub = net.endpoint("c")
    hub.listen("sim:room")
    p = net.endpoint("p1")
    p.connect("sim:room")
    p.send("c", b"first")
    _drain(net)
    kinds = [kind for _, kind, _, _, _ in net.trace]
    assert kinds.index("connect") < kinds.index("msg")


def test_sim_oob_reaches_every_listener_including_sender():
    net = sim_network_new(0)
    ears = [net.oob(h) for h in ("c", "p1", "p2")]
    ears[0].emit(b"\x01hello")
    _drain(net)
    assert [e.poll() for e in ears] == [[b"\x01hello"]] * 3


def test_sim_hooks():
    net, hub, spokes = _star(2)
    net.interpose = lambda env: [replace(env, data=env.data.upper())] if env.src != "c" else []
    net.oob_tamper = lambda data: data[::-1]
    listener = net.oob("c")
    _drain(net)
    spokes[0].send("c", b"abc")
    hub.send("p1", b"dropped")
    net.oob("p1").emit(b"xy")
    _drain(net)
    assert hub.receive() == [("p1", b"ABC")]
    assert spokes[0].receive() == []
    assert listener.poll() == [b"yx"]


def test_sim_ordinals_count_unicasts():
    net, hub, spokes = _star(5, n=4)
    seen = []
    net.interpose = lambda env: seen.append(env.ordinal) or [env]
    _drain(net)
    hub.accept()
    hub.broadcast(b"x")
    spokes[0].send("c", b"y")
    assert seen == [0, 1, 2, 3]


# --------------------------------------------------------------------- tcp


def _wait(fn, timeout=3.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        v = fn()
        if v:
            return v
        time.sleep(0.01)
    raise AssertionError("condition not met in time")


def test_tcp_exchange():
    sid = bytes(range(8))
    outer = wire.digest(b"x")
    with TcpChannel.listen() as server, TcpChannel() as client:
        host, port = parse_tcp(server.descriptor)
        assert host == "127.0.0.1" and port > 0
        peer_of_client = client.connect(server.descriptor)
        commit = wire.encode_message(wire.Commit(sid, outer))
        client.send(peer_of_client, commit)
        src, data = server.receive(timeout=3)
        assert server.accept() == [src]
        assert wire.decode_message(data) == wire.Commit(sid, outer)
        roster = wire.encode_message(wire.Roster(sid, (outer, wire.digest(b"y"))))
        server.broadcast(roster)
        assert client.receive(timeout=3) == (peer_of_client, roster)
        assert client.receive(timeout=0.05) is None


def test_tcp_large_and_many_frames():
    with TcpChannel.listen() as server, TcpChannel() as client:
        peer = client.connect(server.descriptor)
        blobs = [bytes([i]) * (i * 997) for i in range(1, 30)]
        for b in blobs:
            client.send(peer, b)
        got = [server.receive(timeout=3)[1] for _ in blobs]
        assert got == blobs


def test_tcp_connect_failed():
    with TcpChannel.listen() as probe:
        dead = probe.descriptor
    with TcpChannel() as client, pytest.raises(ConnectFailed):
        client.connect(dead, timeout=1.0)


def test_tcp_disconnect_detected():
    with TcpChannel.listen() as server:
        client = TcpChannel()
        client.connect(server.descriptor)
        (peer,) = _wait(server.accept)
        client.close()
        assert _wait(server.disconnected) == [peer]
        with pytest.raises(PeerDisconnected):
            for _ in range(50):
                server.send(peer, b"x" * 65536)
                time.sleep(0.01)


def test_coordinator_times_out_after_peer_vanishes(tmp_path):
    card = tmp_path / "c.json"
    card.write_text(json.dumps(card_to_json(_make_card(0))))
    oob = tmp_path / "oob"
    oob.mkdir()
    proc = subprocess.Popen(
        [sys.executable, "-m", "pairsonic", "pair", "coordinate", "--group-size", "3", "--contact", str(card),
         "--oob-dir", str(oob), "--timeout", "1.5", "--auto-confirm", "--linger", "0.2"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        ear = FileOobChannel(oob)
        (payload,) = _wait(ear.poll, timeout=10)
        init = wire.decode_oob(payload)
        with TcpChannel() as ch:
            peer = ch.connect(init.descriptor)
            ch.send(peer, wire.encode_message(wire.Hello(init.session_id, 1)))
        out, err = proc.communicate(timeout=20)
    finally:
        proc.kill()
    assert proc.returncode == 3, out + err
    assert "timeout" in out


# ---------------------------------------------------------------- file OOB


def test_file_oob_round_trip(tmp_path):
    tx = FileOobChannel(tmp_path)
    rx = FileOobChannel(tmp_path)
    assert rx.poll() == []
    first = tx.emit(b"\x01one")
    second = tx.emit(b"\x02two")
    assert (first.name, second.name) == ("oob-0001.wav", "oob-0002.wav")
    assert rx.poll() == [b"\x01one", b"\x02two"]
    assert rx.poll() == []
    assert not list(tmp_path.glob(".oob-*"))


def test_file_oob_split_directories(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    ch = FileOobChannel(a, listen_dir=b)
    ch.emit(b"zz")
    assert ch.poll() == []
    (b / "oob-0001.wav").write_bytes((a / "oob-0001.wav").read_bytes())
    assert ch.poll() == [b"zz"]


def test_file_oob_respects_band(tmp_path):
    FileOobChannel(tmp_path, ModemConfig()).emit(b"hi")
    assert FileOobChannel(tmp_path, ModemConfig(band=Band.ULTRASONIC)).poll() == []


def test_file_oob_skips_bad_files(tmp_path):
    ch = FileOobChannel(tmp_path)
    ch.emit(b"good")
    (tmp_path / "oob-0002.wav").write_bytes(b"RIFF\x00\x00")
    ch.emit(b"after")
    assert ch.poll() == [b"good", b"after"]


def test_file_oob_strict(tmp_path):
    (tmp_path / "oob-0001.wav").write_bytes(b"garbage")
    with pytest.raises(UnsupportedWav):
        FileOobChannel(tmp_path, strict=True).poll()
    assert issubclass(UnsupportedWav, ModemError)
