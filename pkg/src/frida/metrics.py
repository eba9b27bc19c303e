"""Angular error metrics, truth-to-estimate matching and circular statistics."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError

EXHAUSTIVE_MAX_K = 2


def circular_distance(phi, phi_hat):
    """Signed wrapped difference ``phi - phi_hat`` in (-pi, pi].

    The magnitude is the geodesic distance on the unit circle.
    """
    phi = np.asarray(phi, dtype=float)
    phi_hat = np.asarray(phi_hat, dtype=float)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(phi_hat))):
        raise ParameterError("angles must be finite")
    # written as -((x' + pi) mod 2pi - pi) with x' = -x so that +pi stays +pi
    d = -(np.mod(phi_hat - phi + np.pi, 2 * np.pi) - np.pi)
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class MatchReport:
    """Optimal pairing of true and estimated azimuths.

    ``permutation[i]`` is the estimate index matched to truth ``i``;
    ``errors[i]`` is the signed distance truth minus estimate.
    """

    errors: np.ndarray
    permutation: np.ndarray
    total_error: float
    success: np.ndarray

    @property
    def mean_error(self) -> float:
        return self.total_error / len(self.errors)

    @property
    def recovered(self) -> int:
        return int(np.sum(self.success))

    def to_dict(self) -> dict:
        return {
            "errors": self.errors.tolist(),
            "permutation": self.permutation.tolist(),
            "total_error": self.total_error,
            "success": self.success.tolist(),
        }


def match_and_score(truth, estimate, tolerance: float = np.inf) -> MatchReport:
    """Pair ``truth`` and ``estimate`` to minimize the total absolute circular error.

    A source is a success when its matched error is strictly below ``tolerance``.
    """
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    estimate = np.atleast_1d(np.asarray(estimate, dtype=float))
    if truth.shape != estimate.shape or truth.ndim != 1:
        raise ParameterError(f"need equal counts, got {truth.size} truths and {estimate.size} estimates")
    k = truth.size
    if k == 0:
        raise ParameterError("nothing to match")
    cost = np.abs(circular_distance(truth[:, None], estimate[None, :]))
    if k <= EXHAUSTIVE_MAX_K:
        perm = min(permutations(range(k)), key=lambda p: cost[np.arange(k), list(p)].sum())
        perm = np.array(perm)
    else:
        rows, cols = linear_sum_assignment(cost)
        perm = cols[np.argsort(rows)]
    errors = circular_distance(truth, estimate[perm])
    errors = np.atleast_1d(errors)
    return MatchReport(
        errors=errors,
        permutation=perm,
        total_error=float(np.sum(np.abs(errors))),
        success=np.abs(errors) < tolerance,
    )


def circular_mean_spread(samples) -> tuple:
    """Mean direction arg(sum e^{j theta}) and mean absolute distance to it."""
    theta = np.atleast_1d(np.asarray(samples, dtype=float))
    if theta.size == 0:
        raise ParameterError("no samples")
    mean = float(np.mod(np.angle(np.sum(np.exp(1j * theta))), 2 * np.pi))
    spread = float(np.mean(np.abs(circular_distance(theta, mean))))
    return mean, spread
