from __future__ import annotations

import hashlib
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairsonic.modem import (
    AWGN,
    Band,
    DcOffset,
    Gain,
    IndexOutOfRange,
    ModemConfig,
    Pad,
    PayloadTooLarge,
    PcmBuffer,
    RateMismatch,
    UnsupportedWav,
    decode_report,
    demodulate,
    impair,
    modulate,
    tone_frequency,
    wav_read,
    wav_write,
)

AUDIBLE = ModemConfig()
ULTRA = ModemConfig(band=Band.ULTRASONIC)


def band_fraction(pcm: PcmBuffer, band: Band) -> float:
    spec = np.abs(np.fft.rfft(pcm.samples.astype(np.float64))) ** 2
    freqs = np.fft.rfftfreq(pcm.samples.size, 1.0 / pcm.sample_rate)
    inside = (freqs >= band.low) & (freqs <= band.high)
    return float(spec[inside].sum() / spec.sum())


# ------------------------------------------------------------------ tones


def test_tone_plan():
    assert AUDIBLE.tone_spacing == pytest.approx(140.625)
    assert tone_frequency(AUDIBLE, 0, 0) == pytest.approx(1875 + 0.5 * 140.625)
    assert tone_frequency(AUDIBLE, 1, 15) == pytest.approx(6375 - 0.5 * 140.625)
    assert tone_frequency(ULTRA, 0, 0) == pytest.approx(15000 + 0.5 * 140.625)
    tones = AUDIBLE.all_tones()
    assert len(set(tones)) == 32
    assert all(Band.AUDIBLE.low < f < Band.AUDIBLE.high for f in tones)


@pytest.mark.parametrize("bank,index", [(2, 0), (0, 16), (-1, 3)])
def test_tone_index_out_of_range(bank, index):
    with pytest.raises(IndexOutOfRange):
        tone_frequency(AUDIBLE, bank, index)


def test_symbols_resolve_adjacent_tones():
    # one symbol spans at least one period of the tone spacing
    assert AUDIBLE.sample_rate / AUDIBLE.symbol_samples <= AUDIBLE.tone_spacing
    with pytest.raises(ValueError):
        ModemConfig(symbol_duration_ms=5.0)


# ----------------------------------------------------------------- airtime


def test_airtime_of_protocol_payloads():
    assert AUDIBLE.airtime(41) == pytest.approx((4 + 1 + 41 + 4 + 8) * 0.064)
    assert AUDIBLE.airtime(41) <= 5.0
    assert AUDIBLE.airtime(33) <= 4.0
    assert len(modulate(AUDIBLE, bytes(41))) == AUDIBLE.frame_symbols(41) * AUDIBLE.symbol_samples


# ---------------------------------------------------------------- loopback


@pytest.mark.parametrize("cfg", [AUDIBLE, ULTRA], ids=["audible", "ultrasonic"])
@pytest.mark.parametrize("size", [1, 2, 41, 100, 192])
def test_clean_loopback(cfg, size, rng):
    payload = rng.randbytes(size)
    frames = demodulate(cfg, modulate(cfg, payload))
    assert len(frames) == 1
    got, start = frames[0]
    assert got == payload
    assert abs(start) <= 2


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=1, max_size=60))
def test_loopback_property(payload):
    assert [p for p, _ in demodulate(AUDIBLE, modulate(AUDIBLE, payload))] == [payload]


def test_payload_bounds():
    with pytest.raises(PayloadTooLarge):
        modulate(AUDIBLE, bytes(193))
    with pytest.raises(PayloadTooLarge):
        modulate(AUDIBLE, b"")


def test_silence_decodes_nothing():
    assert demodulate(AUDIBLE, PcmBuffer.silence(3.0, 48000)) == []


def test_noise_alone_decodes_nothing():
    noise = PcmBuffer(np.random.default_rng(5).normal(0, 0.2, 48000 * 3), 48000)
    assert demodulate(AUDIBLE, noise) == []


def test_two_frames_with_gap_and_offsets(rng):
    a, b = rng.randbytes(20), rng.randbytes(33)
    lead = PcmBuffer.silence(0.3117, 48000)
    pcm = lead + modulate(AUDIBLE, a) + PcmBuffer.silence(0.5, 48000) + modulate(AUDIBLE, b)
    frames = demodulate(AUDIBLE, pcm)
    assert [p for p, _ in frames] == [a, b]
    assert abs(frames[0][1] - len(lead)) <= 2


def test_wrong_band_decodes_nothing(rng):
    assert demodulate(ULTRA, modulate(AUDIBLE, rng.randbytes(10))) == []


def test_rate_mismatch():
    with pytest.raises(RateMismatch):
        demodulate(AUDIBLE, PcmBuffer(np.zeros(1000), 44100))
    with pytest.raises(RateMismatch):
        PcmBuffer(np.zeros(3), 48000) + PcmBuffer(np.zeros(3), 44100)


def test_report_counts_rs_failures(rng):
    payload = rng.randbytes(41)
    pcm = modulate(AUDIBLE, payload)
    x = pcm.samples.copy()
    n = AUDIBLE.symbol_samples
    # wipe 10 data symbols (more than the 4-byte correction radius)
    for k in range(6, 16):
        x[k * n : (k + 1) * n] = 0.0
    report = decode_report(AUDIBLE, PcmBuffer(x, 48000))
    assert report.frames == []
    assert report.sync_hits
    assert report.rs_failures + report.crc_failures >= 1


def test_corrects_a_few_wiped_symbols(rng):
    payload = rng.randbytes(41)
    x = modulate(AUDIBLE, payload).samples.copy()
    n = AUDIBLE.symbol_samples
    for k in (10, 20, 30):
        x[k * n : (k + 1) * n] = 0.0
    report = decode_report(AUDIBLE, PcmBuffer(x, 48000))
    assert [f.payload for f in report.frames] == [payload]
    assert report.frames[0].corrected_bytes == 3


# --------------------------------------------------------------- spectrum


@pytest.mark.parametrize("cfg", [AUDIBLE, ULTRA], ids=["audible", "ultrasonic"])
def test_band_containment(cfg, rng):
    for size in (1, 41, 192):
        assert band_fraction(modulate(cfg, rng.randbytes(size)), cfg.band) >= 0.97


def test_ultrasonic_peak_above_15k(rng):
    pcm = modulate(ULTRA, rng.randbytes(41))
    spec = np.abs(np.fft.rfft(pcm.samples))
    freqs = np.fft.rfftfreq(pcm.samples.size, 1 / 48000)
    assert freqs[np.argmax(spec)] > 15000


def test_amplitude_bounded(rng):
    pcm = modulate(AUDIBLE, rng.randbytes(100))
    assert np.max(np.abs(pcm.samples)) <= AUDIBLE.amplitude + 1e-6


def test_golden_pcm_hash():
    """Frozen int16 rendering of b"hello" (regression guard on the waveform)."""
    pcm = modulate(AUDIBLE, b"hello")
    q = np.round(np.clip(pcm.samples.astype(np.float64), -1, 1) * 32767).astype("<i2")
    assert len(q) == 22 * 3072
    assert hashlib.sha256(q.tobytes()).hexdigest() == "a2c7c65b7485be3b98ac2a06f913970badaecff55695701218166a6a9c9de697"


# ------------------------------------------------------------ impairments


def test_awgn_snr_and_determinism(rng):
    pcm = modulate(AUDIBLE, rng.randbytes(41))
    a = impair(pcm, [AWGN(15.0)], seed=9)
    b = impair(pcm, [AWGN(15.0)], seed=9)
    assert a == b
    noise = a.samples.astype(np.float64) - pcm.samples
    snr = 10 * np.log10(np.mean(pcm.samples.astype(np.float64) ** 2) / np.mean(noise**2))
    assert snr == pytest.approx(15.0, abs=0.2)


def test_gain_offset_pad(rng):
    payload = rng.randbytes(12)
    pcm = modulate(AUDIBLE, payload)
    out = impair(pcm, [Gain(0.3), DcOffset(0.05), Pad(0.5, 0.5), AWGN(20)], seed=2)
    assert len(out) >= len(pcm)
    assert [p for p, _ in demodulate(AUDIBLE, out)] == [payload]


def test_recovers_at_15db(rng):
    ok = 0
    for seed in range(20):
        payload = rng.randbytes(41)
        out = impair(modulate(ULTRA, payload), [Pad(0.2, 0.2), AWGN(15.0)], seed=seed)
        ok += [p for p, _ in demodulate(ULTRA, out)] == [payload]
    assert ok >= 19


# -------------------------------------------------------------------- WAV


def test_wav_round_trip_within_quantization(tmp_path, rng):
    pcm = modulate(AUDIBLE, rng.randbytes(30))
    path = tmp_path / "x.wav"
    wav_write(path, pcm)
    back = wav_read(path)
    assert back.sample_rate == 48000
    assert np.max(np.abs(back.samples - pcm.samples)) <= 2.0**-15
    with wave.open(str(path)) as w:
        assert (w.getnchannels(), w.getsampwidth(), w.getframerate()) == (1, 2, 48000)


def test_wav_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(48000)
        w.writeframes(bytes(400))
    with pytest.raises(UnsupportedWav):
        wav_read(path)


def test_wav_rejects_8bit_and_garbage(tmp_path):
    path = tmp_path / "u8.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(1)
        w.setframerate(48000)
        w.writeframes(bytes(100))
    with pytest.raises(UnsupportedWav):
        wav_read(path)
    junk = tmp_path / "junk.wav"
    junk.write_bytes(b"not a wav file at all")
    with pytest.raises(UnsupportedWav):
        wav_read(junk)


def test_wav_truncated(tmp_path, rng):
    path = tmp_path / "t.wav"
    wav_write(path, modulate(AUDIBLE, rng.randbytes(5)))
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2 + 1])
    with pytest.raises(UnsupportedWav):
        wav_read(path)
