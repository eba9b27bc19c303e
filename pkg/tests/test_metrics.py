from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from frida.errors import ParameterError
from frida.metrics import circular_distance, circular_mean_spread, match_and_score
from oracles import brute_force_matching, wrapped_distance

angle = st.floats(-20, 20, allow_nan=False)
deg = np.radians


def test_circular_distance_examples():
    assert abs(circular_distance(deg(350), 0.0)) == pytest.approx(deg(10))
    assert circular_distance(1.234, 1.234) == 0.0
    assert abs(circular_distance(0.0, np.pi)) == pytest.approx(np.pi)
    assert circular_distance(deg(10), deg(30)) == pytest.approx(-deg(20))


def test_circular_distance_range_is_half_open():
    assert circular_distance(np.pi, 0.0) == pytest.approx(np.pi)
    assert circular_distance(0.0, np.pi) == pytest.approx(np.pi)
    d = circular_distance(np.linspace(-10, 10, 1001), 0.3)
    assert np.all((d > -np.pi) & (d <= np.pi))


def test_circular_distance_rejects_non_finite():
    with pytest.raises(ParameterError):
        circular_distance(np.nan, 0.0)
    with pytest.raises(ParameterError):
        circular_distance(0.0, [1.0, np.inf])


@given(angle, angle)
def test_distance_matches_geodesic_oracle(a, b):
    assert abs(circular_distance(a, b)) == pytest.approx(wrapped_distance(a, b), abs=1e-12)


@given(angle, angle, angle)
def test_metric_axioms(a, b, c):
    dab, dba = abs(circular_distance(a, b)), abs(circular_distance(b, a))
    assert dab == pytest.approx(dba, abs=1e-12)
    assert dab <= abs(circular_distance(a, c)) + abs(circular_distance(c, b)) + 1e-12
    assert circular_distance(a, a) == 0.0


def test_identity_of_indiscernibles_on_the_circle():
    x = np.linspace(0, 2 * np.pi, 997, endpoint=False)
    d = np.abs(circular_distance(x[:, None], x[None, :]))
    off = ~np.eye(x.size, dtype=bool)
    assert np.all(d[off] > 0) and np.all(np.diag(d) == 0)


def test_match_example():
    r = match_and_score(deg([10, 20]), deg([20.5, 9]))
    np.testing.assert_array_equal(r.permutation, [1, 0])
    assert r.total_error == pytest.approx(deg(1.5))
    np.testing.assert_allclose(r.errors, deg([1, -0.5]))


def test_match_single_and_permuted():
    r = match_and_score([0.1], [6.2])
    assert r.errors[0] == pytest.approx(circular_distance(0.1, 6.2))
    rng = np.random.default_rng(0)
    truth = rng.uniform(0, 2 * np.pi, 7)
    r = match_and_score(truth, truth[rng.permutation(7)])
    assert r.total_error == 0.0 and r.recovered == 7


def test_success_is_strict():
    r = match_and_score([0.0, 1.0], [0.25, 1.0], tolerance=0.25)
    np.testing.assert_array_equal(r.success, [False, True])
    assert r.recovered == 1


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_matching_is_optimal_against_enumeration(k):
    rng = np.random.default_rng(k)
    for _ in range(200):
        truth, est = rng.uniform(0, 2 * np.pi, (2, k))
        r = match_and_score(truth, est)
        assert r.total_error == pytest.approx(brute_force_matching(truth, est), abs=1e-12)
        assert sorted(r.permutation) == list(range(k))
        for perm in permutations(range(k)):
            other = sum(wrapped_distance(t, est[p]) for t, p in zip(truth, perm))
            assert r.total_error <= other + 1e-12


def test_match_errors():
    with pytest.raises(ParameterError):
        match_and_score([1.0, 2.0], [1.0])
    with pytest.raises(ParameterError):
        match_and_score([], [])


def test_report_serializes():
    d = match_and_score([1.0, 2.0], [2.1, 1.0], tolerance=0.2).to_dict()
    assert d["permutation"] == [1, 0] and d["success"] == [True, True]


@pytest.mark.parametrize(
    "samples, mean, spread",
    [([0, 0], 0, 0), ([10, -10], 0, 10), ([359, 1], 0, 1), ([90], 90, 0), ([80, 100, 90], 90, 20 / 3)],
)
def test_circular_mean_spread(samples, mean, spread):
    m, s = circular_mean_spread(deg(samples))
    assert abs(circular_distance(m, deg(mean))) < 1e-12
    assert s == pytest.approx(deg(spread), abs=1e-12)


def test_circular_mean_requires_samples():
    with pytest.raises(ParameterError):
        circular_mean_spread([])
