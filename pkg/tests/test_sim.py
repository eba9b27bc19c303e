import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.io import wavfile

from frida.errors import ParameterError
from frida.geometry import ArrayGeometry, build_triangular_array
from frida.sim import (
    FD_TAPS,
    MultichannelSignal,
    SourceScenario,
    add_noise,
    fractional_delay_filter,
    propagation_delays,
    read_wav,
    simulate_farfield,
    write_wav,
)

FS = 16000


def relative_delay(x0, x1, fs=FS, fmax=0.8):
    """Delay of x0 relative to x1 (samples).

    Integer part from the cross-correlation peak, fractional part from the
    magnitude-weighted slope of the remaining cross-spectrum phase.
    """
    n = len(x0)
    lag = np.argmax(np.correlate(x0, x1, mode="full")) - (n - 1)
    X0, X1 = np.fft.rfft(x0), np.fft.rfft(x1)
    k = np.arange(1, int(fmax * (n // 2)))
    w = 2 * np.pi * k / n
    cross = X0[k] * np.conj(X1[k]) * np.exp(1j * w * lag)
    mag = np.abs(cross)
    return lag - np.sum(mag * w * np.angle(cross)) / np.sum(mag * w * w)


def test_cross_correlation_peak_matches_geometry():
    d = 343 * 5.3 / FS  # 5.3 samples
    geom = ArrayGeometry([[0, 0], [d, 0]])
    sig = simulate_farfield(geom, SourceScenario([0.0], 8192), rng_seed=1)
    x0, x1 = sig.channels
    xc = np.correlate(x0, x1, mode="full")
    lag = np.argmax(xc) - (len(x1) - 1)
    assert lag == round(d / 343 * FS) == 5


@given(st.floats(0, 2 * np.pi), st.integers(0, 2**31))
def test_far_field_delays_within_a_tenth_of_a_sample(phi, seed):
    geom = build_triangular_array(0.3, 3)
    sig = simulate_farfield(geom, SourceScenario([phi], 8192), seed)
    p = np.array([np.cos(phi), np.sin(phi)])
    for q, qq in [(0, 4), (2, 7), (8, 1)]:
        expected = p @ (geom.positions[q] - geom.positions[qq]) / geom.speed_of_sound * FS
        # channel q lags channel q' by -<p, r_q - r_q'>/c
        assert relative_delay(sig.channels[q], sig.channels[qq]) == pytest.approx(-expected, abs=0.1)


def test_fractional_delay_filter_preserves_power():
    rng = np.random.default_rng(0)
    n = 2**16
    wave = rng.standard_normal((1, n + 2000))
    geom = ArrayGeometry([[0, 0], [0.0123, 0.0041], [-0.02, 0.017]])
    sig = simulate_farfield(geom, SourceScenario([1.1], n, signal_kind="waveform", waveforms=wave), 0)
    ref = np.mean(wave[0, 1000 : 1000 + n] ** 2)
    np.testing.assert_allclose(np.mean(sig.channels**2, axis=1), ref, rtol=0.01)


@pytest.mark.parametrize("frac", [0.0, 0.25, 0.5, 0.9])
def test_fractional_delay_filter_has_unit_dc_gain_and_right_delay(frac):
    taps = fractional_delay_filter(frac)
    assert taps.size == FD_TAPS
    assert taps.sum() == pytest.approx(1.0, abs=2e-3)
    # group delay at low frequency
    w = np.array([0.010, 0.011])
    response = np.array([np.sum(taps * np.exp(-1j * x * np.arange(FD_TAPS))) for x in w])
    delay = -np.diff(np.unwrap(np.angle(response)))[0] / np.diff(w)[0]
    assert delay == pytest.approx(FD_TAPS // 2 + frac, abs=1e-3)


def test_simulation_is_deterministic_and_seed_dependent():
    geom = build_triangular_array()
    scen = SourceScenario([0.2, 2.0], 1024)
    a = simulate_farfield(geom, scen, 7).channels
    np.testing.assert_array_equal(a, simulate_farfield(geom, scen, 7).channels)
    assert not np.array_equal(a, simulate_farfield(geom, scen, 8).channels)


def test_propagation_delays_nearest_mic_first():
    geom = ArrayGeometry([[0, 0], [1, 0]])
    d = propagation_delays(geom, [0.0], FS)
    assert d[1, 0] < d[0, 0]


def test_scenario_validation():
    with pytest.raises(ParameterError):
        SourceScenario([0.1, 0.1 + 2 * np.pi], 1024)
    with pytest.raises(ParameterError):
        SourceScenario([], 1024)
    with pytest.raises(ParameterError):
        SourceScenario([0.0], 1024, signal_kind="speech")
    with pytest.raises(ParameterError):
        simulate_farfield(build_triangular_array(), SourceScenario([0.0], FD_TAPS - 1), 0)


def test_add_noise_infinite_snr_is_identity():
    sig = MultichannelSignal(np.random.default_rng(0).standard_normal((3, 100)), FS)
    out = add_noise(sig, math.inf, 0)
    np.testing.assert_array_equal(out.channels, sig.channels)
    assert out.channels is not sig.channels


def test_add_noise_power_at_zero_db():
    rng = np.random.default_rng(1)
    sig = MultichannelSignal(rng.standard_normal((4, 2**16)) * [[1], [2], [0.5], [1]], FS)
    target = np.mean(sig.channels**2)
    for seed in (0, 1):
        noise = add_noise(sig, 0.0, seed).channels - sig.channels
        np.testing.assert_allclose(np.mean(noise**2, axis=1), target, rtol=0.05)
    n0 = add_noise(sig, 0.0, 0).channels
    assert not np.array_equal(n0, add_noise(sig, 0.0, 1).channels)


def test_wav_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    sig = MultichannelSignal(0.1 * rng.standard_normal((5, 300)), FS)
    path = tmp_path / "x.wav"
    write_wav(sig, path)
    back = read_wav(path, expected_channels=5)
    assert back.sample_rate == FS
    np.testing.assert_allclose(back.channels, sig.channels, atol=1e-7)


def test_wav_int16_scaling_and_errors(tmp_path):
    data = np.array([[32767, -32767], [0, 16384]], dtype=np.int16)
    path = tmp_path / "i.wav"
    wavfile.write(path, FS, data)
    back = read_wav(path)
    np.testing.assert_allclose(back.channels, [[1.0, 0.0], [-1.0, 16384 / 32767]])
    with pytest.raises(ParameterError, match="channel count mismatch"):
        read_wav(path, expected_channels=24)
    with pytest.raises(ParameterError, match="missing.wav"):
        read_wav(tmp_path / "missing.wav")
