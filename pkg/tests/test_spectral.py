import json

import numpy as np
import pytest

from frida.errors import ParameterError
from frida.frimap import farfield_visibilities
from frida.geometry import build_triangular_array
from frida.sim import MultichannelSignal, SourceScenario, simulate_farfield
from frida.spectral import (
    analysis_window,
    covariance,
    dump_measurements,
    estimate_visibilities,
    select_bands,
    stft,
)

FS = 16000


def tone(bin_index, n=256 * 8, channels=2, fft=256):
    t = np.arange(n)
    x = np.sin(2 * np.pi * bin_index * t / fft)
    return MultichannelSignal(np.tile(x, (channels, 1)), FS)


def test_stft_shape_and_frequencies():
    sig = MultichannelSignal(np.zeros((3, 256 * 256 + 17)), FS)
    snap = stft(sig)
    assert snap.frames.shape == (256, 3, 129)
    np.testing.assert_allclose(snap.bin_frequencies, 2 * np.pi * np.arange(129) * FS / 256)
    assert snap.omega(10) == pytest.approx(2 * np.pi * 10 * FS / 256)
    assert not np.any(snap.frames)


def test_pure_tone_concentrates_in_its_bin():
    snap = stft(tone(37))
    frame = np.abs(snap.frames[0, 0]) ** 2
    # unit bin magnitude by window normalization; Hann main lobe keeps 2/3 in the
    # centre bin and everything else in the two neighbours
    assert np.abs(snap.frames[0, 0, 37]) == pytest.approx(1.0, rel=1e-12)
    assert frame[37] / frame.sum() == pytest.approx(2 / 3, rel=1e-9)
    assert frame[36:39].sum() / frame.sum() > 0.999999


def test_stft_against_direct_dft():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 512))
    snap = stft(MultichannelSignal(x, FS))
    w = analysis_window(256)
    n = np.arange(256)
    for f in range(2):
        for b in (0, 5, 128):
            direct = np.sum(x[1, f * 256 : (f + 1) * 256] * w * np.exp(2j * np.pi * b * n / 256))
            assert snap.frames[f, 1, b] == pytest.approx(direct, abs=1e-12)


def test_stft_rejects_short_or_odd():
    with pytest.raises(ParameterError):
        stft(MultichannelSignal(np.zeros((2, 100)), FS))
    with pytest.raises(ParameterError):
        stft(MultichannelSignal(np.zeros((2, 1000)), FS), fft_size=255)


def test_select_bands_policies():
    snap = stft(tone(21, channels=3))
    assert select_bands(snap, 1) == [21]
    rng = np.random.default_rng(1)
    noise = stft(MultichannelSignal(rng.standard_normal((4, 256 * 64)), FS))
    bands = select_bands(noise, 20)
    assert len(set(bands)) == 20 and 0 not in bands and 128 not in bands
    assert bands == sorted(bands)
    assert select_bands(noise, 3, policy="explicit-list", bands=[9, 4, 7]) == [9, 4, 7]
    lim = select_bands(noise, 5, freq_range=(1000, 2000))
    assert all(1000 <= b * FS / 256 <= 2000 for b in lim)


def test_select_bands_ties_go_to_lower_bins():
    snap = stft(MultichannelSignal(np.zeros((2, 512)), FS))
    assert select_bands(snap, 3) == [1, 2, 3]


@pytest.mark.parametrize("kwargs", [{"count": 0}, {"count": 128}, {"count": 2, "policy": "loudest"},
                                    {"count": 1, "policy": "explicit-list", "bands": [0]},
                                    {"count": 1, "policy": "explicit-list", "bands": []},
                                    {"count": 50, "freq_range": (100, 500)}])
def test_select_bands_errors(kwargs):
    snap = stft(MultichannelSignal(np.zeros((2, 512)), FS))
    with pytest.raises(ParameterError):
        select_bands(snap, **kwargs)


def test_visibilities_of_a_single_source_follow_the_model():
    geom = build_triangular_array(0.3, 3)
    phi = 1.2
    sig = simulate_farfield(geom, SourceScenario([phi], 256 * 256), 3)
    snap = stft(sig)
    meas = estimate_visibilities(snap, [20, 40])
    for m in meas:
        assert m.a.size == 72
        mag = np.abs(m.a)
        assert mag.max() / mag.min() < 1.1
        model = farfield_visibilities(geom, m.omega, [phi], [1.0])
        phase_err = np.angle(m.a * np.conj(model))
        assert np.abs(phase_err).max() < 0.1
        # pair (q', q) is the conjugate of (q, q')
        pairs = [tuple(p) for p in geom.baselines.pairs]
        for i, (q, qq) in enumerate(pairs):
            assert m.a[pairs.index((qq, q))] == np.conj(m.a[i])


def test_identical_channels_give_equal_real_entries():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(256 * 16)
    snap = stft(MultichannelSignal(np.tile(x, (4, 1)), FS))
    (m,) = estimate_visibilities(snap, [30])
    assert np.all(m.a.imag == 0)
    assert np.all(m.a.real > 0)
    np.testing.assert_allclose(m.a, m.a[0], rtol=1e-12)


def test_visibilities_are_linear_in_independent_sources():
    geom = build_triangular_array(0.3, 2)
    a = simulate_farfield(geom, SourceScenario([0.5], 256 * 256), 1)
    b = simulate_farfield(geom, SourceScenario([2.5], 256 * 256), 2)
    both = MultichannelSignal(a.channels + b.channels, FS)
    va, vb, vab = (estimate_visibilities(stft(s), [25])[0].a for s in (a, b, both))
    assert np.linalg.norm(vab - va - vb) / np.linalg.norm(vab) < 0.15


def test_covariance_is_hermitian_and_variance_is_reported():
    rng = np.random.default_rng(6)
    snap = stft(MultichannelSignal(rng.standard_normal((3, 256 * 32)), FS))
    c = covariance(snap, 10)
    np.testing.assert_array_equal(c, c.conj().T)
    (m,) = estimate_visibilities(snap, [10])
    # independent channels: entries are pure noise, so |a|^2 ~ variance
    assert 0.3 < np.mean(np.abs(m.a) ** 2) / m.variance < 3


def test_visibility_errors_and_export(tmp_path):
    snap = stft(MultichannelSignal(np.zeros((2, 512)), FS))
    with pytest.raises(ParameterError):
        estimate_visibilities(snap, [])
    one = stft(MultichannelSignal(np.zeros((2, 256)), FS))
    with pytest.raises(ParameterError):
        estimate_visibilities(one, [3])
    meas = estimate_visibilities(snap, [3, 4])
    data = json.loads(dump_measurements(meas, tmp_path / "m.json"))
    assert data["schema_version"] == 1 and [b["band"] for b in data["bands"]] == [3, 4]
