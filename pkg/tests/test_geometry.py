import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from frida.errors import ParameterError
from frida.geometry import (
    ArrayGeometry,
    baselines,
    build_triangular_array,
    load_geometry,
    ordered_pairs,
    save_geometry,
)


def pairwise(pos):
    return np.array([np.linalg.norm(a - b) for a, b in itertools.combinations(pos, 2)])


def test_default_triangle_matches_reference_layout():
    geom = build_triangular_array(0.30, 8)
    d = pairwise(geom.positions)
    assert geom.num_mics == 24
    assert 7e-3 <= d.min() <= 9e-3
    assert d.max() <= 0.30
    # frozen values of the placement rule
    assert d.min() == pytest.approx(0.00769607, abs=1e-8)
    assert d.max() == pytest.approx(0.25, abs=1e-9)
    np.testing.assert_allclose(geom.positions.mean(axis=0), 0, atol=1e-12)


def test_two_per_edge_gives_the_vertices():
    geom = build_triangular_array(0.30, 2)
    np.testing.assert_allclose(pairwise(geom.positions), 0.30, rtol=1e-12)
    assert geom.positions[np.argmax(geom.positions[:, 1])][0] == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("n", [3, 5, 8, 11])
def test_triangle_mics_lie_on_edges(n):
    geom = build_triangular_array(0.5, n)
    assert geom.num_mics == 3 * n
    assert pairwise(geom.positions).min() > 0
    # distance from the centroid to each edge line equals the inradius
    inradius = 0.5 / (2 * np.sqrt(3))
    angles = np.pi / 2 + np.pi / 3 + 2 * np.pi / 3 * np.arange(3)
    normals = np.stack([np.cos(angles), np.sin(angles)], 1)
    on_edge = np.isclose(geom.positions @ normals.T, -inradius, atol=1e-12) | np.isclose(
        geom.positions @ normals.T, inradius, atol=1e-12
    )
    assert on_edge.any(axis=1).all()


@pytest.mark.parametrize("args", [(0.0, 8), (-1.0, 8), (0.3, 1), (0.3, 2.5), (float("nan"), 8)])
def test_triangle_rejects_bad_arguments(args):
    with pytest.raises(ParameterError):
        build_triangular_array(*args)


def test_baselines_of_two_mics():
    geom = ArrayGeometry([[0, 0], [0.343, 0]], 343.0)
    bs = baselines(geom)
    np.testing.assert_allclose(bs.deltas, [[-1e-3, 0], [1e-3, 0]], atol=1e-18)
    assert [tuple(p) for p in bs.pairs] == [(0, 1), (1, 0)]


def test_pair_order_is_lexicographic():
    pairs = ordered_pairs(3)
    assert [tuple(p) for p in pairs] == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


@pytest.mark.parametrize(
    "positions",
    [[[0, 0]], [[0, 0], [0, 0]], [[0, 0], [np.inf, 0]], [[0, 0, 0], [1, 1, 1]], [[0, 0], [1e-10, 0]]],
)
def test_geometry_invariants(positions):
    with pytest.raises(ParameterError):
        ArrayGeometry(positions)


def test_geometry_rejects_bad_speed():
    with pytest.raises(ParameterError):
        ArrayGeometry([[0, 0], [1, 0]], speed_of_sound=0)


coords = arrays(np.float64, (5, 2), elements=st.floats(-1, 1, allow_nan=False))


@given(coords, st.floats(-10, 10), st.floats(-10, 10))
def test_baselines_antisymmetric_and_translation_invariant(pos, tx, ty):
    if pairwise(pos).min() <= 1e-6:
        return
    geom = ArrayGeometry(pos)
    bs = geom.baselines
    assert len(bs) == 20
    index = {tuple(p): i for i, p in enumerate(bs.pairs)}
    for (q, qq), i in index.items():
        np.testing.assert_array_equal(bs.deltas[i], -bs.deltas[index[(qq, q)]])
    moved = ArrayGeometry(pos + [tx, ty])
    np.testing.assert_allclose(moved.baselines.deltas, bs.deltas, atol=1e-12 / 343)
    np.testing.assert_array_equal(moved.baselines.pairs, bs.pairs)


def test_geometry_is_immutable_and_hashable():
    geom = build_triangular_array()
    with pytest.raises(ValueError):
        geom.positions[0, 0] = 1.0
    assert hash(geom) == hash(build_triangular_array())
    assert geom == build_triangular_array()
    assert geom != build_triangular_array(0.31)


def test_subset_and_aperture():
    geom = build_triangular_array()
    sub = geom.subset([0, 5, 9])
    np.testing.assert_array_equal(sub.positions, geom.positions[[0, 5, 9]])
    assert geom.aperture == pytest.approx(0.25)


def test_geometry_file_round_trip(tmp_path):
    geom = build_triangular_array()
    path = tmp_path / "g.json"
    save_geometry(geom, path)
    assert load_geometry(path) == geom
    (tmp_path / "list.json").write_text(json.dumps([[0, 0], [0.1, 0], [0, 0.1]]))
    assert load_geometry(tmp_path / "list.json").num_mics == 3


def test_geometry_file_errors_name_the_path(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ParameterError, match="nope.json"):
        load_geometry(missing)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"positions": [[0, 0], [1, 0]], "colour": "red"}))
    with pytest.raises(ParameterError, match="colour"):
        load_geometry(bad)
