"""Joint multi-band annihilating-filter reconstruction of source azimuths.

For a filter ``h`` the per-band problem

    min_b ||a_i - G_i b||^2   subject to   b * h = 0

is a linear least-squares problem, and substituting its solution leaves a
quadratic form ``h^H Lambda(h) h`` in the filter alone. ``Lambda`` is rebuilt
from the previous filter at every iteration and the new filter is the
eigenvector of its smallest eigenvalue. Each restart runs until the filter
settles; further random restarts are tried only while the best residual
stays above ``epsilon_sq``.

``Lambda`` needs (G^H G)^-1, which is regularized when G is ill-conditioned
(low bands, orders far into the Bessel tail), so its fixed point can sit
slightly off the constrained minimum. The roots are therefore polished by a
bounded local least-squares fit on the same residual, using that the null
space of R(h) is spanned by the K exponentials exp(-j m phi_k).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import least_squares, nnls

from .errors import NumericalFailure, ParameterError

log = logging.getLogger(__name__)


def toeplitz_of(b: np.ndarray, filter_len: int) -> np.ndarray:
    """T(b) with ``T(b)[i, l] = b[K + i - l]``, shape (len(b) - K, K + 1)."""
    b = np.asarray(b)
    k = int(filter_len) - 1
    if b.ndim != 1 or k < 0 or b.size < k + 1:
        raise ParameterError(f"need len(b) >= filter_len, got {b.size} < {filter_len}")
    return sla.toeplitz(b[k:], b[k::-1])


def right_dual_of(h: np.ndarray, b_len: int) -> np.ndarray:
    """R(h) with ``R(h) b == T(b) h``, shape (b_len - K, b_len)."""
    h = np.asarray(h)
    k = h.size - 1
    if h.ndim != 1 or k < 0 or b_len < k + 1:
        raise ParameterError(f"need b_len >= len(h), got {b_len} < {h.size}")
    col = np.zeros(b_len - k, dtype=h.dtype)
    col[0] = h[k]
    row = np.zeros(b_len, dtype=h.dtype)
    row[: k + 1] = h[::-1]
    return sla.toeplitz(col, row)


def annihilating_filter(azimuths) -> np.ndarray:
    """Unit-norm filter whose polynomial has roots exp(-j phi_k)."""
    h = np.array([1.0 + 0j])
    for phi in np.atleast_1d(azimuths):
        h = np.convolve(h, [1.0, -np.exp(-1j * phi)])
    return h / np.linalg.norm(h)


def extract_azimuths(h: np.ndarray) -> np.ndarray:
    """Azimuths -arg(z_k) of the roots of ``sum_l h_l z^(K-l)``, sorted ascending."""
    h = np.asarray(h, dtype=complex)
    k = h.size - 1
    if k < 1:
        raise ParameterError("filter must have at least two coefficients")
    scale = np.linalg.norm(h)
    if scale == 0:
        raise ParameterError("zero filter")
    tol = 1e-12 * scale
    if abs(h[0]) <= tol or abs(h[-1]) <= tol:
        warnings.warn("annihilating filter has reduced degree; roots are best effort")
        nz = np.nonzero(np.abs(h) > tol)[0]
        h = h[nz[0] : nz[-1] + 1]
    roots = _roots(h)
    if roots.size < k:
        # pad reduced-degree solutions with roots spread around the circle
        extra = np.exp(-2j * np.pi * (np.arange(k - roots.size) + 0.5) / (k - roots.size))
        roots = np.concatenate([roots, extra])
    return np.sort(np.mod(-np.angle(roots), 2 * np.pi))


def _roots(h: np.ndarray) -> np.ndarray:
    k = h.size - 1
    if k == 0:
        return np.empty(0, dtype=complex)
    if k == 1:
        return np.array([-h[1] / h[0]])
    if k == 2:
        a, b, c = h
        disc = np.sqrt(b * b - 4 * a * c)
        # pick the sign avoiding cancellation, recover the other root from the product
        q = -0.5 * (b + disc) if abs(b + disc) >= abs(b - disc) else -0.5 * (b - disc)
        if q == 0:
            return np.zeros(2, dtype=complex)
        return np.array([q / a, c / q])
    companion = np.zeros((k, k), dtype=complex)
    companion[0, :] = -h[1:] / h[0]
    companion[1:, :-1] = np.eye(k - 1)
    return np.linalg.eigvals(companion)


@dataclass
class SolverConfig:
    """Iteration controls.

    ``epsilon_sq`` is either a number or ``"auto"`` (noise floor estimated
    from the measurements' variances). ``ridge`` regularizes the inverse
    inside ``Lambda``; ``tikhonov`` regularizes ``G^H G`` relative to its
    mean diagonal. A restart stops once the residual changes by less than
    ``settle_tol`` (relative) between iterations. ``refine`` enables the
    final local polish of the azimuths.
    """

    max_init: int = 15
    max_iter: int = 50
    epsilon_sq: float | str = "auto"
    ridge: float = 1e-12
    tikhonov: float = 1e-10
    settle_tol: float = 1e-9
    refine: bool = True

    def __post_init__(self):
        if int(self.max_init) != self.max_init or self.max_init < 1:
            raise ParameterError("max_init must be a positive integer")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ParameterError("max_iter must be a positive integer")
        if self.ridge < 0 or self.tikhonov < 0 or self.settle_tol < 0:
            raise ParameterError("ridge, tikhonov and settle_tol must be nonnegative")
        if self.epsilon_sq != "auto":
            try:
                value = float(self.epsilon_sq)
            except (TypeError, ValueError):
                raise ParameterError("epsilon_sq must be a number or 'auto'") from None
            if value < 0:
                raise ParameterError("epsilon_sq must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DoaEstimate:
    azimuths: np.ndarray
    powers: np.ndarray  # (K, J)
    residual: float
    iterations_used: int = 0
    restarts_used: int = 0
    filter: np.ndarray | None = None
    epsilon_sq: float | None = None
    max_order: int | None = None
    degenerate: bool = False
    coefficients: list | None = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "azimuths": [float(v) for v in self.azimuths],
            "powers": np.asarray(self.powers, dtype=float).tolist(),
            "residual": float(self.residual),
            "iterations_used": int(self.iterations_used),
            "restarts_used": int(self.restarts_used),
            "epsilon_sq": None if self.epsilon_sq is None else float(self.epsilon_sq),
            "max_order": self.max_order,
            "degenerate": bool(self.degenerate),
        }
        if self.filter is not None:
            out["filter"] = {"real": self.filter.real.tolist(), "imag": self.filter.imag.tolist()}
        out.update(self.extra)
        return out


class _Bands:
    """Stacked per-band quantities that do not depend on the filter.

    ``gram_inv`` is the (Tikhonov-regularized) inverse of G^H G and ``beta``
    the corresponding least-squares Fourier coefficients.
    """

    def __init__(self, measurements, mappings, k, tikhonov):
        self.a = np.stack([np.asarray(m.a, dtype=complex) for m in measurements])
        self.g = np.stack([np.asarray(g.matrix, dtype=complex) for g in mappings])
        self.k = k
        n = self.g.shape[2]
        gram = np.conj(np.swapaxes(self.g, 1, 2)) @ self.g
        scale = np.maximum(np.trace(gram, axis1=1, axis2=2).real / n, np.finfo(float).tiny)
        gram = gram + tikhonov * scale[:, None, None] * np.eye(n)
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("G^H G is not positive definite", {"tikhonov": tikhonov}) from exc
        eye = np.broadcast_to(np.eye(n), gram.shape)
        linv = np.linalg.solve(chol, eye)
        self.gram_inv = np.conj(np.swapaxes(linv, 1, 2)) @ linv
        rhs = np.conj(np.swapaxes(self.g, 1, 2)) @ self.a[..., None]
        self.beta = (self.gram_inv @ rhs)[..., 0]
        self.toeplitz = np.stack([toeplitz_of(b, k + 1) for b in self.beta])
        self.observed = [_observed_order(g) for g in mappings]

    @property
    def size(self) -> int:
        return self.g.shape[2]

    def lam(self, h, ridge):
        """Lambda(h) = sum_i T(beta_i)^H [R C_i R^H + ridge]^-1 T(beta_i)."""
        k = self.k
        p = self.size - k
        taps = h[::-1]  # R[i, i + j] = h[K - j]
        left = sum(taps[j] * self.gram_inv[:, j : j + p, :] for j in range(k + 1))
        s = sum(np.conj(taps[j]) * left[:, :, j : j + p] for j in range(k + 1))
        s = (s + np.conj(np.swapaxes(s, 1, 2))) / 2
        scale = np.maximum(np.trace(s, axis1=1, axis2=2).real / p, np.finfo(float).tiny)
        s = s + ridge * scale[:, None, None] * np.eye(p)
        try:
            x = np.linalg.solve(s, self.toeplitz)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(
                "singular R (G^H G)^-1 R^H despite ridge", {"ridge": ridge, "filter": h.tolist()}
            ) from exc
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("non-finite Lambda", {"ridge": ridge, "filter": h.tolist()})
        lam = np.sum(np.conj(np.swapaxes(self.toeplitz, 1, 2)) @ x, axis=0)
        return (lam + lam.conj().T) / 2

    def constrained_fit(self, h):
        """Least-squares coefficients restricted to the null space of R(h).

        Returns the (J, 2M+1) coefficients and the total squared residual.
        """
        r = right_dual_of(h, self.size)
        q, _ = np.linalg.qr(r.conj().T, mode="complete")
        null = q[:, r.shape[0] :]
        gn = self.g @ null
        qq, rr = np.linalg.qr(gn)
        proj = np.conj(np.swapaxes(qq, 1, 2)) @ self.a[..., None]
        try:
            c = np.linalg.solve(rr, proj)[..., 0]
        except np.linalg.LinAlgError:
            c = np.stack([np.linalg.lstsq(m, a, rcond=None)[0] for m, a in zip(gn, self.a)])
        b = c @ null.T
        err = self.a - (self.g @ b[..., None])[..., 0]
        return b, float(np.sum(np.abs(err) ** 2))

    def exponential_fit(self, azimuths):
        """Residual vector (real, imag stacked) of the best fit by K exponentials per band."""
        orders = np.arange(self.size) - (self.size - 1) // 2
        basis = np.exp(-1j * np.outer(orders, azimuths))
        cols = self.g @ basis
        res = []
        for c, a in zip(cols, self.a):
            coef = np.linalg.lstsq(c, a, rcond=None)[0]
            res.append(a - c @ coef)
        res = np.concatenate(res)
        return np.concatenate([res.real, res.imag])

    def initial_filter(self):
        """Prony-style start from the well-observed central orders of every band."""
        k = self.k
        m = (self.size - 1) // 2
        blocks = []
        for beta, observed in zip(self.beta, self.observed):
            keep = min(max(observed, k), m)
            blocks.append(toeplitz_of(beta[m - keep : m + keep + 1], k + 1))
        _, _, vh = np.linalg.svd(np.vstack(blocks), full_matrices=False)
        return vh[-1].conj()


def _observed_order(mapping) -> int:
    """Largest order whose column carries non-negligible energy."""
    norms = np.linalg.norm(mapping.matrix, axis=0)
    m = mapping.max_order
    if norms.max() == 0:
        return m
    return int(np.max(np.abs(np.nonzero(norms >= 1e-3 * norms.max())[0] - m)))


def _auto_epsilon(measurements, num_pairs) -> float:
    total = sum(float(np.vdot(m.a, m.a).real) for m in measurements)
    noise = sum(num_pairs * (m.variance or 0.0) for m in measurements)
    # three standard deviations of a chi-square residual with J*P complex terms
    noise *= 1 + 3 / np.sqrt(len(measurements) * num_pairs)
    return max(1e-12 * total, noise)


def refine_azimuths(bands: _Bands, azimuths: np.ndarray) -> np.ndarray:
    """Polish ``azimuths`` on the constrained residual, each kept within half
    the gap to its neighbours so estimates cannot swap or merge."""
    az = np.sort(np.asarray(azimuths, dtype=float))
    k = az.size
    if k > 1:
        gaps = np.diff(np.r_[az, az[0] + 2 * np.pi])
        half = 0.5 * np.minimum(gaps, np.roll(gaps, 1))
    else:
        half = np.array([np.pi / 2])
    half = np.maximum(half * (1 - 1e-9), 1e-12)
    fit = least_squares(
        bands.exponential_fit, az, bounds=(az - half, az + half), method="trf",
        x_scale=1e-3, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * (k + 1),
    )
    if not np.all(np.isfinite(fit.x)):
        return az
    before = np.sum(bands.exponential_fit(az) ** 2)
    return np.sort(np.mod(fit.x, 2 * np.pi)) if 2 * fit.cost <= before else az


def solve(measurements, mappings, num_sources: int, cfg: SolverConfig | None = None, rng_seed=0):
    """Reconstruct ``num_sources`` azimuths from multi-band visibilities.

    Parameters
    ----------
    measurements : sequence of SubbandMeasurement
    mappings : sequence of MappingMatrix, one per measurement, sharing one truncation
    num_sources : int
    cfg : SolverConfig
    rng_seed : int
        Seed for the random restarts.

    Returns
    -------
    DoaEstimate
    """
    cfg = cfg or SolverConfig()
    k = int(num_sources)
    if k < 1:
        raise ParameterError("num_sources must be >= 1")
    if len(measurements) == 0 or len(measurements) != len(mappings):
        raise ParameterError("need one mapping per measurement and at least one band")
    orders = {m.max_order for m in mappings}
    if len(orders) != 1:
        raise ParameterError(f"all bands must share one truncation, got {sorted(orders)}")
    n = 2 * orders.pop() + 1
    if k + 1 > n:
        raise ParameterError(f"filter length {k + 1} exceeds {n} Fourier coefficients")

    if not all(np.all(np.isfinite(m.a)) for m in measurements):
        raise NumericalFailure("non-finite visibilities", {"bands": [m.band for m in measurements]})
    bands = _Bands(measurements, mappings, k, cfg.tikhonov)
    num_pairs = bands.a.shape[1]
    eps = _auto_epsilon(measurements, num_pairs) if cfg.epsilon_sq == "auto" else float(cfg.epsilon_sq)
    rng = np.random.default_rng(rng_seed)

    best_h, best_res, iterations, restarts = None, np.inf, 0, 0
    history = []
    for restart in range(cfg.max_init):
        restarts = restart + 1
        if restart == 0:
            h = bands.initial_filter()
        else:
            h = rng.standard_normal(k + 1) + 1j * rng.standard_normal(k + 1)
            h /= np.linalg.norm(h)
        prev = np.inf
        for _ in range(cfg.max_iter):
            iterations += 1
            _, vecs = np.linalg.eigh(bands.lam(h, cfg.ridge))
            h_prev, h = h, vecs[:, 0]
            _, res = bands.constrained_fit(h)
            if res < best_res:
                best_h, best_res = h, res
            # a restart runs to its fixed point; epsilon_sq only gates further restarts
            if 1 - abs(np.vdot(h_prev, h)) < 1e-13:
                break
            if np.isfinite(prev) and abs(prev - res) <= cfg.settle_tol * prev:
                break
            prev = res
        history.append(float(best_res))
        log.debug("restart %d: residual %.3e (eps %.3e)", restart, best_res, eps)
        if best_res <= eps:
            break

    azimuths = extract_azimuths(best_h)
    coeffs, best_res = bands.constrained_fit(best_h)
    if cfg.refine and best_res > 0:
        polished = refine_azimuths(bands, azimuths)
        h = annihilating_filter(polished)
        c2, r2 = bands.constrained_fit(h)
        if r2 <= best_res:
            azimuths, best_h, coeffs, best_res = polished, h, c2, r2
    powers = estimate_powers(azimuths, measurements, mappings)
    degenerate = bool(np.all(powers == 0))
    return DoaEstimate(
        azimuths=azimuths,
        powers=powers,
        residual=best_res,
        iterations_used=iterations,
        restarts_used=restarts,
        filter=best_h,
        epsilon_sq=eps,
        max_order=(n - 1) // 2,
        degenerate=degenerate,
        coefficients=coeffs,
        extra={"best_residuals": history},
    )


def estimate_powers(azimuths, measurements, mappings) -> np.ndarray:
    """Nonnegative per-band source powers, shape (K, J).

    Steering columns come from the mapping applied to unit-power Fourier
    coefficients, so no geometry is needed.
    """
    azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
    out = np.zeros((azimuths.size, len(measurements)))
    worst = 0.0
    for j, (meas, mapping) in enumerate(zip(measurements, mappings)):
        orders = mapping.truncation.orders
        coeffs = np.exp(-1j * np.outer(orders, azimuths)) / (2 * np.pi)
        steer = mapping.matrix @ coeffs
        if azimuths.size > 1:
            worst = max(worst, float(np.linalg.cond(steer)))
        lhs = np.vstack([steer.real, steer.imag])
        rhs = np.concatenate([meas.a.real, meas.a.imag])
        out[:, j], _ = nnls(lhs, rhs)
    if worst > 1e8:
        warnings.warn(f"power fit is ill-conditioned (cond up to {worst:.2e})")
    return out
