"""Linear map from circular Fourier coefficients of the intensity to visibilities.

Row ``(q, q')``, column ``m`` of the mapping holds

    2 pi (-j)^m J_m(omega |dr|) exp(j m theta)

where ``dr`` is the normalized baseline of the pair and ``theta`` its angle.
With ``b_m = (1 / 2 pi) sum_k sigma_k^2 exp(-j m phi_k)`` this reproduces the
far-field cross-correlations ``sum_k sigma_k^2 exp(-j omega <p_k, dr>)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateMappingError, ParameterError
from .geometry import ArrayGeometry

_RESCALE = 1e250
_SERIES_MAX_TERMS = 400

# (-j)^m for m mod 4
_MINUS_J_POWERS = np.array([1.0, -1.0j, -1.0, 1.0j])


def _series(orders: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Ascending power series of J_m(x); ``orders`` and ``x`` broadcast."""
    orders = np.asarray(orders, dtype=float)
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lead = orders * np.log(half) - gammaln(orders + 1)
    lead = np.where(half > 0, np.exp(log_lead), np.where(orders == 0, 1.0, 0.0))
    q = -half * half
    term = np.ones(np.broadcast(orders, x).shape)
    total = term.copy()
    for k in range(1, _SERIES_MAX_TERMS):
        term = term * q / (k * (orders + k))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return lead * total


def _miller(max_order: int, x: np.ndarray) -> np.ndarray:
    """Downward recurrence for J_0..J_max_order at positive ``x`` (1-d).

    Normalized with J_0 + 2 sum_k J_2k = 1; rescales to avoid overflow.
    """
    top = max(max_order, float(x.max()))
    start = int(top + 30 + 10 * top ** (1.0 / 3.0))
    start += start % 2
    out = np.zeros((x.size, max_order + 1))
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds the unnormalized J_{k-1}
        if k - 1 <= max_order:
            out[:, k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        big = np.abs(j_cur) > _RESCALE
        if big.any():
            j_cur[big] /= _RESCALE
            j_next[big] /= _RESCALE
            norm[big] /= _RESCALE
            out[big] /= _RESCALE
    norm += j_cur
    return out / norm[:, None]


def bessel_j_orders(max_order: int, x) -> np.ndarray:
    """J_m(x) for m = 0..max_order.

    Parameters
    ----------
    max_order : int
    x : array_like
        Nonnegative finite arguments.

    Returns
    -------
    ndarray of shape ``x.shape + (max_order + 1,)``.
    """
    max_order = int(max_order)
    if max_order < 0:
        raise ParameterError("max_order must be nonnegative")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("Bessel argument must be finite")
    if np.any(x < 0):
        raise ParameterError("Bessel argument must be nonnegative")
    flat = x.ravel()
    orders = np.arange(max_order + 1)
    out = np.empty((flat.size, max_order + 1))

    # series where x < m/2 (and for all orders when x <= 2); recurrence elsewhere
    use_series = (flat[:, None] < orders[None, :] / 2.0) | (flat[:, None] <= 2.0)
    rows = np.nonzero(~use_series.all(axis=1))[0]
    if rows.size:
        out[rows] = _miller(max_order, flat[rows])
    if use_series.any():
        r, c = np.nonzero(use_series)
        out[r, c] = _series(orders[c], flat[r])
    return out.reshape(x.shape + (max_order + 1,))


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind, integer order."""
    if int(order) != order:
        raise ParameterError("order must be an integer")
    order = int(order)
    x = float(x)
    if not math.isfinite(x):
        raise ParameterError("Bessel argument must be finite")
    sign = 1.0
    if order < 0:
        order = -order
        sign = -1.0 if order % 2 else 1.0
    if x < 0:
        x = -x
        sign *= -1.0 if order % 2 else 1.0
    return sign * float(bessel_j_orders(order, x)[order])


@dataclass(frozen=True)
class FourierTruncation:
    """Symmetric set of circular Fourier orders -M..M."""

    max_order: int

    def __post_init__(self):
        if int(self.max_order) != self.max_order or self.max_order < 0:
            raise ParameterError("max_order must be a nonnegative integer")

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.max_order, self.max_order + 1)

    @property
    def size(self) -> int:
        return 2 * self.max_order + 1


TRUNCATION_BUFFER = 10


def truncation_order(x: float, buffer: int = TRUNCATION_BUFFER) -> int:
    """Default model order: ``ceil(x) + buffer``.

    Tails beyond this are ~1e-5 relative for the arguments met in practice,
    well under the visibility noise; see :func:`accurate_truncation_order`
    for exact-data work.
    """
    return int(math.ceil(x)) + int(buffer)


def accurate_truncation_order(x: float) -> int:
    """Order beyond which every |J_m(x)| is below ~1e-12: ``x + 6 x^(1/3) + 10``."""
    return int(math.ceil(x + 6.0 * x ** (1.0 / 3.0))) + 10


def max_truncation(num_mics: int) -> int:
    """Largest M with 2M+1 <= Q(Q-1)."""
    return (num_mics * (num_mics - 1) - 1) // 2


def choose_truncation(
    geom: ArrayGeometry, omega: float, num_sources: int, accurate: bool = False
) -> FourierTruncation:
    """Shared model order for a band up to ``omega``, capped by the measurement count.

    ``accurate`` switches to the convergent rule (for exact, noiseless data).
    """
    if num_sources < 1:
        raise ParameterError("number of sources must be >= 1")
    if not (math.isfinite(omega) and omega >= 0):
        raise ParameterError("omega must be finite and nonnegative")
    x = omega * float(geom.baselines.norms.max())
    order = accurate_truncation_order(x) if accurate else truncation_order(x)
    m = max(order, num_sources + 2)
    m = min(m, max_truncation(geom.num_mics))
    if m < num_sources:
        raise ParameterError(
            f"array too small for requested model order: {geom.num_mics} microphones "
            f"allow M={m} < K={num_sources}"
        )
    return FourierTruncation(m)


@dataclass(frozen=True)
class MappingMatrix:
    omega: float
    truncation: FourierTruncation
    matrix: np.ndarray  # (Q(Q-1), 2M+1)

    @property
    def max_order(self) -> int:
        return self.truncation.max_order

    def singular_value_ratio(self) -> float:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return float(s[-1] / s[0]) if s[0] > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "max_order": self.max_order,
            "real": self.matrix.real.tolist(),
            "imag": self.matrix.imag.tolist(),
        }


def mapping_entries(deltas: np.ndarray, omega: float, max_order: int) -> np.ndarray:
    """Mapping matrix for raw baselines (seconds), orders -max_order..max_order."""
    deltas = np.asarray(deltas, dtype=float)
    norms = np.hypot(deltas[:, 0], deltas[:, 1])
    theta = np.arctan2(deltas[:, 1], deltas[:, 0])
    orders = np.arange(-max_order, max_order + 1)
    jpos = bessel_j_orders(max_order, omega * norms)
    jm = jpos[:, np.abs(orders)]
    jm = jm * np.where((orders < 0) & (orders % 2 == 1), -1.0, 1.0)
    phase = np.exp(1j * np.outer(theta, orders))
    return 2 * np.pi * _MINUS_J_POWERS[orders % 4] * jm * phase


@lru_cache(maxsize=512)
def _cached_mapping(geom: ArrayGeometry, omega: float, max_order: int) -> np.ndarray:
    g = mapping_entries(geom.baselines.deltas, omega, max_order)
    g.setflags(write=False)
    return g


def build_mapping(
    geom: ArrayGeometry,
    omega: float,
    trunc: FourierTruncation,
    check_rank: bool = False,
    rank_tol: float = 1e-8,
) -> MappingMatrix:
    """Mapping matrix for one sub-band.

    With ``check_rank`` the ratio of extreme singular values must exceed
    ``rank_tol``; accurate truncations push the outermost columns towards the
    Bessel tail, so the check is opt-in.
    """
    if not (math.isfinite(omega) and omega >= 0):
        raise ParameterError("omega must be finite and nonnegative")
    mm = MappingMatrix(float(omega), trunc, _cached_mapping(geom, float(omega), trunc.max_order))
    if check_rank:
        if trunc.size > len(geom.baselines):
            raise DegenerateMappingError(
                f"degenerate geometry/truncation: {trunc.size} orders exceed "
                f"{len(geom.baselines)} measurements"
            )
        ratio = mm.singular_value_ratio()
        if ratio <= rank_tol:
            raise DegenerateMappingError(
                f"degenerate geometry/truncation: singular value ratio {ratio:.3e} "
                f"<= {rank_tol:g} at omega={omega:.6g}, M={trunc.max_order}"
            )
    return mm


def fourier_coefficients(azimuths, powers, trunc: FourierTruncation) -> np.ndarray:
    """Circular Fourier coefficients of a point-source intensity on orders -M..M."""
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    powers = np.broadcast_to(np.asarray(powers, dtype=float), azimuths.shape)
    return np.exp(-1j * np.outer(trunc.orders, azimuths)) @ powers / (2 * np.pi)


def farfield_visibilities(geom: ArrayGeometry, omega: float, azimuths, powers) -> np.ndarray:
    """Exact cross-correlations of uncorrelated far-field point sources."""
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    powers = np.broadcast_to(np.asarray(powers, dtype=float), azimuths.shape)
    return steering_correlations(geom, omega, azimuths) @ powers


def steering_correlations(geom: ArrayGeometry, omega: float, azimuths) -> np.ndarray:
    """Columns exp(-j omega <p_k, dr>) over all ordered pairs."""
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    p = np.stack([np.cos(azimuths), np.sin(azimuths)])
    return np.exp(-1j * omega * (geom.baselines.deltas @ p))
