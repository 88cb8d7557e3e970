from __future__ import annotations

import json

import pytest

from pairsonic import wire
from pairsonic.protocol import ProtocolConfig
from pairsonic.sim import (
    AlwaysConfirm,
    AlwaysDecline,
    ConfirmSubset,
    DropMessage,
    FlipInBandBit,
    Honest,
    InjectExtraParticipant,
    NoAdversary,
    NonQuiescent,
    Scenario,
    SplitRoster,
    SubstituteCommit,
    SubstituteReveal,
    SuppressAborts,
    TamperOobDigest,
    adversary_name,
    expected_reasons,
    is_substitution,
    make_card,
    oracle_name,
    parse_adversary,
    parse_oracle,
    run_matrix,
    run_simulation,
)

OOB = "oob-mismatch"
INTEGRITY = "integrity-failure"


def test_same_seed_same_report():
    a = run_simulation(4, FlipInBandBit(5, 77), Honest(), seed=11)
    b = run_simulation(4, FlipInBandBit(5, 77), Honest(), seed=11)
    assert a.to_json() == b.to_json()
    json.loads(a.to_json())


def test_different_seeds_differ():
    a = run_simulation(3, seed=1).devices[0].roster_digest
    b = run_simulation(3, seed=2).devices[0].roster_digest
    assert a != b


def test_honest_three_devices():
    rep = run_simulation(3, NoAdversary(), Honest(), seed=42)
    assert rep.finalized == 3 and rep.safe
    digests = {d.roster_digest for d in rep.devices}
    assert len(digests) == 1
    assert all(d.showed_lock and d.imported for d in rep.devices)
    assert [d.role for d in rep.devices] == ["coordinator", "participant", "participant"]


def test_roster_digest_covers_all_cards():
    rep = run_simulation(2, seed=3)
    assert rep.devices[0].roster_digest is not None
    assert len(bytes.fromhex(rep.devices[0].roster_digest)) == wire.DIGEST_SIZE


@pytest.mark.parametrize(
    "adv,reasons",
    [
        (TamperOobDigest(3), {OOB}),
        (SplitRoster(), {OOB}),
        (SubstituteReveal(2), {INTEGRITY}),
        (InjectExtraParticipant(), {INTEGRITY}),
        (DropMessage(0), {"timeout"}),
    ],
)
def test_attacks_abort_every_honest_device(adv, reasons):
    for seed in range(5):
        rep = run_simulation(4, adv, Honest(), seed=seed)
        assert rep.finalized == 0
        assert set(rep.reasons()) <= reasons
        assert rep.safe, rep.violations


@pytest.mark.parametrize("victim", [0, 1, 3])
def test_substitute_commit_any_victim(victim):
    rep = run_simulation(4, SubstituteCommit(victim), Honest(), seed=victim)
    assert rep.finalized == 0
    assert set(rep.reasons()) <= {OOB, INTEGRITY}


def test_always_confirm_cannot_rescue_a_tamper():
    rep = run_simulation(5, TamperOobDigest(100), AlwaysConfirm(), seed=9)
    assert rep.finalized == 0
    assert not any(d.showed_lock for d in rep.honest)


def test_suppressed_aborts_still_abort_everyone():
    rep = run_simulation(5, (TamperOobDigest(0), SuppressAborts()), Honest(), seed=4)
    assert all(d.state == "Aborted" for d in rep.honest)
    assert rep.safe


def test_always_decline_imports_nothing():
    rep = run_simulation(4, oracle=AlwaysDecline(), seed=1)
    assert not any(d.imported for d in rep.devices)
    assert set(rep.reasons()) == {"user-declined"}


def test_confirm_subset_declines_everywhere():
    rep = run_simulation(4, oracle=ConfirmSubset((0, 1, 2)), seed=1)
    assert rep.finalized == 0
    assert set(rep.reasons()) == {"user-declined"}


def test_all_confirm_subset_finalizes():
    assert run_simulation(3, oracle=ConfirmSubset((0, 1, 2)), seed=1).finalized == 3


def test_timeout_config_respected():
    cfg = ProtocolConfig(round_timeout=2.5)
    rep = run_simulation(3, DropMessage(1), Honest(), seed=0, config=cfg)
    assert set(rep.reasons()) == {"timeout"}
    assert rep.duration <= 4 * 2.5 + 1


def test_event_budget():
    with pytest.raises(NonQuiescent):
        run_simulation(8, seed=0, max_events=10)


def test_trace_toggle():
    assert run_simulation(2, seed=0).devices[0].trace
    assert run_simulation(2, seed=0, trace=False).devices[0].trace == []


def test_make_card_valid():
    import random

    card = make_card(random.Random(1), 5)
    assert wire.decode_contact_card(wire.encode_contact_card(card)) == card


# --------------------------------------------------------------- naming


@pytest.mark.parametrize(
    "text",
    ["none", "flip-bit:3:17", "substitute-commit:0", "substitute-reveal:2", "split-roster", "split-roster:1,2",
     "inject-extra", "drop:4", "suppress-aborts", "tamper-oob:9", "tamper-oob:1+suppress-aborts"],
)
def test_adversary_names_round_trip(text):
    assert adversary_name(parse_adversary(text)) == text


@pytest.mark.parametrize("text", ["", "nope", "flip-bit:1", "drop:x", "drop:-1", "inject-extra:2"])
def test_adversary_parse_errors(text):
    with pytest.raises(ValueError):
        parse_adversary(text)


@pytest.mark.parametrize("text", ["honest", "always-confirm", "always-decline", "confirm-subset:0,2"])
def test_oracle_names_round_trip(text):
    assert oracle_name(parse_oracle(text)) == text


def test_oracle_parse_error():
    with pytest.raises(ValueError):
        parse_oracle("maybe")


def test_classification():
    assert is_substitution(TamperOobDigest(1))
    assert is_substitution((SuppressAborts(), SubstituteCommit(1)))
    assert not is_substitution(DropMessage(1))
    assert expected_reasons(NoAdversary()) is None
    assert expected_reasons(SuppressAborts()) is None
    assert expected_reasons(DropMessage(0)) == {wire.AbortReason.TIMEOUT}


# --------------------------------------------------------------- matrix


def test_run_matrix():
    summary = run_matrix(
        [Scenario(3), Scenario(3, TamperOobDigest(5)), Scenario(4, DropMessage(2))], range(4)
    )
    assert summary.ok
    honest, tamper, drop = summary.rows
    assert honest.finalization_rate == 1.0
    assert tamper.finalized == 0 and set(tamper.reasons) == {OOB} and tamper.unexpected == 0
    assert drop.finalized == 0 and set(drop.reasons) == {"timeout"}
    assert "tamper-oob:5" in summary.table()


def test_run_matrix_needs_inputs():
    with pytest.raises(ValueError):
        run_matrix([], range(3))
