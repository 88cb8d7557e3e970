"""Acceptance criteria, one test (and one PASS/FAIL line) each.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed as each check finishes and again in the terminal summary.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
import time

import numpy as np

from pairsonic import wire
from pairsonic.cli import card_from_json
from pairsonic.modem import AWGN, Band, ModemConfig, Pad, crc32, demodulate, impair, modulate
from pairsonic.modem.framing import FrameError, build_frame, parse_frame
from pairsonic.sim import (
    AlwaysConfirm,
    AlwaysDecline,
    FlipInBandBit,
    Honest,
    InjectExtraParticipant,
    NoAdversary,
    Scenario,
    SplitRoster,
    SubstituteCommit,
    SubstituteReveal,
    TamperOobDigest,
    expected_reasons,
    run_matrix,
    run_simulation,
)

from .pairing_helpers import run_group, run_tampered_group

SEEDS = range(100)
N_ATTACK = 4
# in-band unicasts before SUCCESS_SET at n=4: HELLO, COMMIT, ROSTER, REVEAL,
# REVEAL_SET and CONFIRM per participant
ORDINALS = 6 * (N_ATTACK - 1)
BANDS = {"audible": ModemConfig(), "ultrasonic": ModemConfig(band=Band.ULTRASONIC)}


def adversaries(seed: int):
    """One instance of each in-band/OOB substitution, parameters drawn from the seed."""
    r = random.Random(seed)
    return [
        FlipInBandBit(r.randrange(ORDINALS), r.randrange(512)),
        SubstituteCommit(r.randrange(N_ATTACK)),
        SubstituteReveal(r.randrange(N_ATTACK)),
        SplitRoster(),
        InjectExtraParticipant(),
        TamperOobDigest(r.randrange(8 * wire.DIGEST_SIZE)),
    ]


def all_or_nothing(report) -> bool:
    imported = {d.imported for d in report.honest}
    return len(imported) == 1


# --------------------------------------------------------------- protocol


def test_criterion_1_honest_liveness(verdict):
    t0 = time.perf_counter()
    summary = run_matrix([Scenario(n) for n in range(2, 9)], SEEDS)
    elapsed = time.perf_counter() - t0
    devices = sum(r.honest_devices for r in summary.rows)
    finalized = sum(r.finalized for r in summary.rows)
    # identical roster digests, checked on the reports themselves
    split = 0
    for n in range(2, 9):
        for seed in SEEDS:
            digests = {d.roster_digest for d in run_simulation(n, seed=seed, trace=False).devices}
            split += len(digests) != 1 or None in digests
    ok = finalized == devices and split == 0 and summary.ok and elapsed < 10.0
    verdict(1, ok, f"{finalized}/{devices} devices finalized over n=2..8 x 100 seeds, "
                   f"{split} runs with differing digests, {elapsed:.2f} s (limit 10 s)")
    assert ok


def test_criterion_2_tamper_safety(verdict):
    finalized = unexpected = runs = 0
    seen: dict[str, set] = {}
    for seed in SEEDS:
        for adv in adversaries(seed):
            rep = run_simulation(N_ATTACK, adv, Honest(), seed, trace=False)
            runs += 1
            allowed = {r.label for r in expected_reasons(adv)}
            for d in rep.honest:
                if d.state == "Finalized":
                    finalized += 1
                elif d.reason not in allowed:
                    unexpected += 1
                seen.setdefault(type(adv).__name__, set()).add(d.reason)
    ok = finalized == 0 and unexpected == 0
    classes = "; ".join(f"{k} {sorted(v, key=str)}" for k, v in seen.items())
    verdict(2, ok, f"{runs} attacked runs at n=4: {finalized} honest finalized, "
                   f"{unexpected} outside the expected reason class ({classes})")
    assert ok


def test_criterion_3_no_partial_import(verdict):
    runs = partial = decline_imports = 0
    for seed in SEEDS:
        for n in range(2, 9):
            for oracle in (Honest(), AlwaysConfirm(), AlwaysDecline()):
                rep = run_simulation(n, NoAdversary(), oracle, seed, trace=False)
                runs += 1
                partial += not all_or_nothing(rep)
                if isinstance(oracle, AlwaysDecline):
                    decline_imports += sum(d.imported for d in rep.devices)
        for adv in adversaries(seed):
            for oracle in (Honest(), AlwaysConfirm(), AlwaysDecline()):
                rep = run_simulation(N_ATTACK, adv, oracle, seed, trace=False)
                runs += 1
                partial += not all_or_nothing(rep)
                if isinstance(oracle, AlwaysDecline):
                    decline_imports += sum(d.imported for d in rep.devices)
    ok = partial == 0 and decline_imports == 0
    verdict(3, ok, f"{runs} runs (honest, always-confirm, always-decline): {partial} partial imports, "
                   f"{decline_imports} imports under always-decline")
    assert ok


# ------------------------------------------------------------------ modem


def test_criterion_4_modem_loopback(verdict):
    rng = random.Random(4)
    t0 = time.perf_counter()
    good = total = 0
    for cfg in BANDS.values():
        for _ in range(1000):
            payload = rng.randbytes(rng.randint(1, 192))
            frames = demodulate(cfg, modulate(cfg, payload))
            good += [p for p, _ in frames] == [payload]
            total += 1
    elapsed = time.perf_counter() - t0
    ok = good == total and elapsed < 60.0
    verdict(4, ok, f"{good}/{total} clean payloads recovered on both bands in {elapsed:.1f} s (limit 60 s)")
    assert ok


def _false_accepts(trials: int, seed: int) -> int:
    rng = random.Random(seed)
    wrong = 0
    for _ in range(trials):
        payload = rng.randbytes(41)
        frame = bytearray(build_frame(payload, 8))
        # 5+ byte errors: beyond the 4-byte correction radius of 8 parity bytes
        for p in rng.sample(range(len(frame)), rng.randint(5, 24)):
            frame[p] ^= rng.randint(1, 255)
        try:
            got, _ = parse_frame(bytes(frame), 8)
        except FrameError:
            continue
        wrong += got != payload
    return wrong


def test_criterion_5_modem_robustness(verdict):
    rng = random.Random(5)
    rates = {}
    for name, cfg in BANDS.items():
        ok_frames = 0
        for k in range(500):
            payload = rng.randbytes(41)
            pcm = impair(modulate(cfg, payload), [Pad(0.25, 0.25), AWGN(15.0)], seed=k)
            ok_frames += [p for p, _ in demodulate(cfg, pcm)] == [payload]
        rates[name] = ok_frames / 500
    corrupted = 100_000
    wrong = _false_accepts(corrupted, seed=55)
    ok = all(r >= 0.99 for r in rates.values()) and wrong == 0
    verdict(5, ok, f"15 dB AWGN recovery audible {100 * rates['audible']:.1f}% / ultrasonic "
                   f"{100 * rates['ultrasonic']:.1f}% (need 99%); {wrong} false accepts in "
                   f"{corrupted} corrupted frames")
    assert ok


def band_fraction(samples: np.ndarray, rate: int, band: Band) -> float:
    spec = np.abs(np.fft.rfft(samples.astype(np.float64))) ** 2
    freqs = np.fft.rfftfreq(samples.size, 1.0 / rate)
    inside = (freqs >= band.low) & (freqs <= band.high)
    return float(spec[inside].sum() / spec.sum())


def test_criterion_6_band_containment(verdict):
    rng = random.Random(6)
    worst = {}
    for name, cfg in BANDS.items():
        payloads = [rng.randbytes(rng.randint(1, 192)) for _ in range(1000)]
        payloads += [b"\x00", b"\xff", bytes(192), b"\xff" * 192, bytes(41), bytes(33)]
        worst[name] = min(band_fraction(modulate(cfg, p).samples, cfg.sample_rate, cfg.band) for p in payloads)
    ok = all(w >= 0.97 for w in worst.values())
    verdict(6, ok, f"worst in-band energy audible {100 * worst['audible']:.2f}% / ultrasonic "
                   f"{100 * worst['ultrasonic']:.2f}% over 1006 frames each (need 97%)")
    assert ok


def test_criterion_7_airtime(verdict):
    cfg = ModemConfig()
    sid = bytes(8)
    init = wire.encode_oob(wire.OobInit(sid, 16, "tcp:192.168.49.1:7465"))
    verify = wire.encode_oob(wire.OobVerify(sid, bytes(32)))
    t_init = len(modulate(cfg, init)) / cfg.sample_rate
    t_verify = len(modulate(cfg, verify)) / cfg.sample_rate
    ok = t_verify <= 5.0 and t_init <= 4.0
    verdict(7, ok, f"VERIFY ({len(verify)} B) {t_verify:.3f} s (limit 5 s), "
                   f"INIT ({len(init)} B) {t_init:.3f} s (limit 4 s)")
    assert ok


# ------------------------------------------------------------ end to end


def test_criterion_8_end_to_end(verdict, tmp_path):
    (tmp_path / "honest").mkdir()
    t0 = time.perf_counter()
    results = run_group(tmp_path / "honest", 3)
    t_honest = time.perf_counter() - t0
    sizes = []
    for r in results:
        cards = json.loads(r.out_file.read_text()) if r.out_file.exists() else []
        sizes.append(len({card_from_json(c) for c in cards}))
    codes = [r.returncode for r in results]

    (tmp_path / "tamper").mkdir()
    t0 = time.perf_counter()
    tampered, flips = run_tampered_group(tmp_path / "tamper", 3, bit=77)
    t_tamper = time.perf_counter() - t0
    tamper_codes = [r.returncode for r in tampered]
    mismatch = all("oob-mismatch" in r.stdout for r in tampered)

    ok = (codes == [0, 0, 0] and sizes == [3, 3, 3] and t_honest < 30.0
          and flips == 1 and tamper_codes == [4, 4, 4] and mismatch and t_tamper < 30.0)
    verdict(8, ok, f"3 processes exit {codes} with {sizes} cards in {t_honest:.1f} s; "
                   f"tampered VERIFY ({flips} flipped) exit {tamper_codes} in {t_tamper:.1f} s (limit 30 s)")
    assert ok, [r.stdout + r.stderr for r in results + tampered]


# ----------------------------------------------------------------- golden


def test_criterion_9_golden_vectors(verdict):
    sid = bytes(range(8))
    card = wire.ContactCard("A", bytes(32))
    card_bytes = b"PC\x01\x01A\x20" + bytes(32) + b"\x00"
    nonces = wire.NoncePair(b"\x11" * 32, b"\x22" * 32)
    agg = bytes.fromhex("849b0087f6553e8ce7ee947c28110102116f31b66d92d8a8a0a9540850417c20")
    checks = {
        "sha256('')": wire.digest(b"").hex()
        == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        "sha256('abc')": wire.digest(b"abc").hex()
        == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        "crc32('123456789')": crc32(b"123456789") == bytes.fromhex("cbf43926"),
        "card": wire.encode_contact_card(card) == card_bytes,
        "outer": wire.make_commitment(card, nonces)[1].hex()
        == "5b936cddaceb1fb412cd711328292f40f00b853bf261b09033c238aa3334e8e5",
        "aggregate": wire.aggregate(sid, 3, [bytes([i]) * 32 for i in (3, 1, 2)]) == agg
        == hashlib.sha256(b"PSAG\x01" + sid + b"\x03" + bytes([1]) * 32 + bytes([2]) * 32 + bytes([3]) * 32).digest(),
        "COMMIT": wire.encode_message(wire.Commit(sid, b"\xab" * 32))
        == struct.pack(">I", 41) + b"\x01" + sid + b"\xab" * 32,
        "ABORT": wire.encode_message(wire.Abort(sid, b"\xcd" * 32, wire.AbortReason.OOB_MISMATCH))
        == struct.pack(">I", 42) + b"\x07" + sid + b"\xcd" * 32 + b"\x02",
        "OOB INIT": wire.encode_oob(wire.OobInit(sid, 3, "tcp:192.168.49.1:7465"))
        == b"\x01\x01" + sid + b"\x03\x15tcp:192.168.49.1:7465",
        "OOB VERIFY": wire.encode_oob(wire.OobVerify(sid, agg)) == b"\x02" + sid + agg,
        "roster digest": wire.roster_digest([card]).hex()
        == "75b09e460db5fb1e0e34973ed166af2c7eeca42255164987c6fa1e585c9941ff",
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    verdict(9, ok, f"{len(checks) - len(failed)}/{len(checks)} frozen vectors bit-exact"
                   + (f" (failed: {', '.join(failed)})" if failed else ""))
    assert ok
