"""Microphone array layouts and the normalized baselines derived from them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ParameterError

SPEED_OF_SOUND = 343.0
MIN_SEPARATION = 1e-9  # meters


@dataclass(frozen=True)
class BaselineSet:
    """All ordered microphone pairs (q, q'), q != q', in lexicographic order.

    ``deltas[i]`` is ``(r_q - r_q') / c`` for ``pairs[i]``, in seconds.
    """

    pairs: np.ndarray  # (Q(Q-1), 2) int
    deltas: np.ndarray  # (Q(Q-1), 2) float

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def norms(self) -> np.ndarray:
        return np.hypot(self.deltas[:, 0], self.deltas[:, 1])

    @property
    def angles(self) -> np.ndarray:
        return np.arctan2(self.deltas[:, 1], self.deltas[:, 0])


def ordered_pairs(num_mics: int) -> np.ndarray:
    """Lexicographic list of (q, q') with q != q'."""
    q, qp = np.meshgrid(np.arange(num_mics), np.arange(num_mics), indexing="ij")
    mask = q != qp
    return np.stack([q[mask], qp[mask]], axis=1)


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Planar microphone array.

    Parameters
    ----------
    positions : array_like, shape (Q, 2)
        Microphone coordinates in meters.
    speed_of_sound : float
        Propagation speed in m/s.
    """

    positions: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ParameterError(f"positions must have shape (Q, 2), got {pos.shape}")
        if pos.shape[0] < 2:
            raise ParameterError("at least two microphones are required")
        if not np.all(np.isfinite(pos)):
            raise ParameterError("microphone positions must be finite")
        c = float(self.speed_of_sound)
        if not (np.isfinite(c) and c > 0):
            raise ParameterError("speed_of_sound must be positive")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= MIN_SEPARATION:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise ParameterError(f"microphones {i} and {j} coincide")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "speed_of_sound", c)
        object.__setattr__(self, "_key", (pos.tobytes(), c))

    def __eq__(self, other):
        return isinstance(other, ArrayGeometry) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    @property
    def num_mics(self) -> int:
        return self.positions.shape[0]

    def __len__(self) -> int:
        return self.num_mics

    @cached_property
    def baselines(self) -> BaselineSet:
        return baselines(self)

    @property
    def aperture(self) -> float:
        """Largest pairwise distance in meters."""
        return float(self.baselines.norms.max() * self.speed_of_sound)

    def subset(self, indices) -> "ArrayGeometry":
        return ArrayGeometry(self.positions[list(indices)], self.speed_of_sound)

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "speed_of_sound": self.speed_of_sound,
        }


def baselines(geom: ArrayGeometry) -> BaselineSet:
    pairs = ordered_pairs(geom.num_mics)
    pos = geom.positions
    deltas = (pos[pairs[:, 0]] - pos[pairs[:, 1]]) / geom.speed_of_sound
    pairs.setflags(write=False)
    deltas.setflags(write=False)
    return BaselineSet(pairs=pairs, deltas=deltas)


def build_triangular_array(
    edge_length: float = 0.30,
    mics_per_edge: int = 8,
    speed_of_sound: float = SPEED_OF_SOUND,
) -> ArrayGeometry:
    """Equilateral triangle centered at the origin with one vertex on +y.

    Each edge carries a cluster of ``mics_per_edge`` microphones placed
    symmetrically about the edge midpoint. Offsets from the midpoint grow
    geometrically from ``edge_length / 75`` (innermost pair 8 mm apart on a
    30 cm edge) to ``edge_length / 3`` (outermost), so pairwise spacings span
    roughly 8 mm to 25 cm for the 30 cm / 8-per-edge layout. Odd counts put
    one microphone on the midpoint. ``mics_per_edge == 2`` is the degenerate
    case and returns the three vertices.
    """
    if not edge_length > 0:
        raise ParameterError("edge_length must be positive")
    if int(mics_per_edge) != mics_per_edge or mics_per_edge < 2:
        raise ParameterError("mics_per_edge must be an integer >= 2")
    n = int(mics_per_edge)

    radius = edge_length / np.sqrt(3.0)
    angles = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    vertices = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if n == 2:
        return ArrayGeometry(vertices, speed_of_sound)

    inner, outer = edge_length / 75.0, edge_length / 3.0
    half = n // 2
    if n % 2 == 0:
        offsets = np.geomspace(inner, outer, half) if half > 1 else np.array([inner])
        offsets = np.concatenate([-offsets[::-1], offsets])
    else:
        offsets = np.geomspace(2 * inner, outer, half) if half > 1 else np.array([outer])
        offsets = np.concatenate([-offsets[::-1], [0.0], offsets])

    points = []
    for e in range(3):
        a, b = vertices[e], vertices[(e + 1) % 3]
        unit = (b - a) / edge_length
        points.append((a + b) / 2 + offsets[:, None] * unit)
    pos = np.concatenate(points)
    pos -= pos.mean(axis=0)
    return ArrayGeometry(pos, speed_of_sound)


def load_geometry(path) -> ArrayGeometry:
    """Read a geometry file.

    Accepted JSON forms are a bare list of ``[x, y]`` pairs or an object with
    ``positions`` and optional ``speed_of_sound``.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParameterError(f"geometry file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"geometry file {path} is not valid JSON: {exc}") from None
    if isinstance(data, list):
        return ArrayGeometry(data)
    if not isinstance(data, dict) or "positions" not in data:
        raise ParameterError(f"geometry file {path} has no 'positions'")
    unknown = set(data) - {"positions", "speed_of_sound"}
    if unknown:
        raise ParameterError(f"unknown keys in geometry file {path}: {sorted(unknown)}")
    return ArrayGeometry(data["positions"], data.get("speed_of_sound", SPEED_OF_SOUND))


def save_geometry(geom: ArrayGeometry, path) -> None:
    Path(path).write_text(json.dumps(geom.to_dict(), indent=2))
