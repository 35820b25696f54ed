import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from acoustic_uplink.signal import (AliasingError, SampleRateMismatch, Waveform, add_awgn,
                                    fractional_delay, make_rng, mix, power, read_wav,
                                    silence, tone, write_wav)
from conftest import phase_at, wrap

FS = 48000.0


def test_waveform_rejects_bad_input():
    with pytest.raises(ValueError):
        Waveform(np.zeros(4), 0)
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]), FS)
    with pytest.raises(ValueError):
        Waveform(np.array([np.inf]), FS)


def test_waveform_is_read_only():
    w = Waveform(np.zeros(4), FS)
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


def test_tone_definition():
    w = tone(500, 0.01, 1, 0, FS)
    assert len(w) == 480
    k = np.arange(480)
    np.testing.assert_allclose(w.samples, np.sin(2 * np.pi * 500 * k / FS), atol=1e-12)


def test_tone_zero_amplitude_and_errors():
    assert not np.any(tone(700, 0.01, 0, 1.3, FS).samples)
    with pytest.raises(AliasingError):
        tone(25000, 0.01, 1, 0, FS)
    with pytest.raises(AliasingError):
        tone(24000, 0.01, 1, 0, FS)
    with pytest.raises(ValueError):
        tone(1000, 0, 1, 0, FS)


def test_tone_energy_in_expected_bin():
    w = tone(1500, 0.02, 1, 0.4, FS)
    spec = np.abs(np.fft.rfft(w.samples)) ** 2
    k = int(round(1500 * len(w) / FS))
    assert spec[k] / spec.sum() > 0.999


def test_mix_examples():
    w = tone(1000, 0.01, 1, 0, FS)
    assert not np.any(mix([(w, 1), (w, -1)]).samples)
    np.testing.assert_array_equal(mix([(w, 2)]).samples, 2 * w.samples)


def test_mix_pads_shorter_and_rejects_rate_mismatch():
    a = Waveform(np.ones(5), FS)
    b = Waveform(np.ones(3), FS)
    np.testing.assert_array_equal(mix([(a, 1), (b, 2)]).samples, [3, 3, 3, 1, 1])
    with pytest.raises(SampleRateMismatch):
        mix([(a, 1), (Waveform(np.ones(5), 8000), 1)])
    with pytest.raises(ValueError):
        mix([])


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 32 - 1))
def test_mix_linearity(g1, g2, seed):
    r = np.random.default_rng(seed)
    a = Waveform(r.standard_normal(64), FS)
    b = Waveform(r.standard_normal(64), FS)
    np.testing.assert_array_equal(mix([(a, g1), (b, g2)]).samples,
                                  g1 * a.samples + g2 * b.samples)


def test_mix_of_three_sources_matches_direct_sum():
    parts = [tone(f, 0.05, a, p, FS) for f, a, p in [(500, 1, 0), (1500, 0.7, 1), (2500, 0.3, 2)]]
    expected = parts[0].samples + parts[1].samples + parts[2].samples
    np.testing.assert_allclose(mix([(p, 1) for p in parts]).samples, expected, atol=1e-15)


def test_power():
    assert power(tone(1000, 0.01, 1, 0, FS)) == pytest.approx(0.5, abs=1e-6)
    assert power(silence(10)) == 0
    with pytest.raises(ValueError):
        power(silence(0))
    pair = mix([(tone(1000, 0.01, 1, 0, FS), 1), (tone(3000, 0.01, 0.5, 1, FS), 1)])
    assert power(pair) == pytest.approx(0.5 + 0.125, abs=1e-3)


def test_zero_delay_is_identity(rng):
    w = Waveform(rng.standard_normal(500), FS)
    np.testing.assert_allclose(fractional_delay(w, 0.0).samples, w.samples, atol=1e-9)


def test_integer_delay_is_a_shift(rng):
    w = Waveform(rng.standard_normal(500), FS)
    out = fractional_delay(w, 7 / FS).samples
    np.testing.assert_allclose(out[7:], w.samples[:-7], atol=1e-6)
    assert not np.any(out[:7])
    back = fractional_delay(w, -7 / FS).samples
    np.testing.assert_allclose(back[:-7], w.samples[7:], atol=1e-6)


def test_quarter_period_delay_gives_90_degree_lag():
    w = tone(1000, 0.05, 1, 0, FS)
    out = fractional_delay(w, 0.25e-3).samples[64:-64]
    ph = phase_at(out, 1000, FS) - 2 * np.pi * 1000 * 64 / FS
    assert abs(wrap(ph + np.pi / 2)) < 0.01


@given(st.floats(50, 21000), st.floats(-2e-3, 2e-3))
def test_delay_phase_matches_analytic(freq, delay_s):
    w = tone(freq, 0.03, 1, 0, FS)
    out = fractional_delay(w, delay_s).samples
    H = 32 + int(abs(delay_s) * FS) + 1
    interior = out[H:-H]
    measured = phase_at(interior, freq, FS) - 2 * np.pi * freq * H / FS
    assert abs(wrap(measured + 2 * np.pi * freq * delay_s)) < 0.01


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_delay_composes(d1, d2):
    x = tone(900, 0.05, 1, 0.2, FS)
    both = fractional_delay(fractional_delay(x, d1 / FS), d2 / FS).samples
    once = fractional_delay(x, (d1 + d2) / FS).samples
    sl = slice(100, -100)
    assert np.max(np.abs(both[sl] - once[sl])) < 1e-4 * np.max(np.abs(once[sl]))


def test_awgn_noiseless_and_determinism():
    w = tone(1000, 0.01, 1, 0, FS)
    assert add_awgn(w, math.inf, 3) is w
    assert add_awgn(w, None, 3) is w
    a = add_awgn(w, 10, 42).samples
    b = add_awgn(w, 10, 42).samples
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        add_awgn(silence(10), 10, 1)


def test_awgn_empirical_snr():
    w = tone(1000, 1e6 / FS, 1, 0, FS)
    noisy = add_awgn(w, 7.0, 11).samples
    measured = 10 * math.log10(power(w) / np.mean((noisy - w.samples) ** 2))
    assert abs(measured - 7.0) < 0.2


def test_awgn_seeds_decorrelate():
    w = Waveform(np.ones(100000), FS)
    n1 = add_awgn(w, 0, 1).samples - 1
    n2 = add_awgn(w, 0, 2).samples - 1
    assert abs(np.corrcoef(n1, n2)[0, 1]) < 0.01


def test_make_rng_tuple_streams_differ():
    a = make_rng((5, 0)).standard_normal(10)
    b = make_rng((5, 1)).standard_normal(10)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, make_rng((5, 0)).standard_normal(10))


def test_wav_roundtrip(tmp_path):
    w = tone(1000, 0.01, 0.5, 0, FS)
    write_wav(tmp_path / "t.wav", w)
    r = read_wav(tmp_path / "t.wav")
    assert r.sample_rate_hz == FS
    np.testing.assert_allclose(r.samples, w.samples, atol=1e-7)
