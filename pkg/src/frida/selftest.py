"""Built-in oracle checks run by ``frida selftest``."""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from . import frimap
from .frimap import FourierTruncation, accurate_truncation_order, fourier_coefficients
from .geometry import ArrayGeometry
from .solver import annihilating_filter, extract_azimuths, right_dual_of, toeplitz_of

# J_m(x) reference values (Abramowitz & Stegun tables)
BESSEL_SPOT_VALUES = [
    (0, 0.0, 1.0),
    (1, 0.0, 0.0),
    (0, 1.0, 0.7651976865579666),
    (1, 1.0, 0.4400505857449335),
    (0, 2.404825557695773, 0.0),
    (5, 10.0, -0.2340615281867936),
    (2, 5.0, 0.0465651162777522),
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value, "tolerance": self.tolerance}


def check_bessel(tol: float = 1e-10) -> CheckResult:
    worst = max(abs(float(frimap.bessel_j_orders(m, np.array(x))[m]) - ref) for m, x, ref in BESSEL_SPOT_VALUES)
    return CheckResult("bessel_spot_values", worst <= tol, worst, tol)


def check_forward_model(trials: int = 20, tol: float = 1e-6, seed: int = 0) -> CheckResult:
    """G b against directly evaluated cross-correlations on random arrays and scenes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        q = int(rng.integers(4, 11))
        geom = ArrayGeometry(rng.uniform(-0.15, 0.15, (q, 2)))
        omega = 2 * np.pi * rng.uniform(100, 8000)
        k = int(rng.integers(1, 4))
        az = rng.uniform(0, 2 * np.pi, k)
        powers = rng.uniform(0.5, 2.0, k)
        m = accurate_truncation_order(omega * geom.baselines.norms.max())
        g = frimap.mapping_entries(geom.baselines.deltas, omega, m)
        b = fourier_coefficients(az, powers, FourierTruncation(m))
        exact = frimap.farfield_visibilities(geom, omega, az, powers)
        worst = max(worst, float(np.linalg.norm(g @ b - exact) / np.linalg.norm(exact)))
    return CheckResult("forward_model", worst <= tol, worst, tol)


def check_annihilation(trials: int = 20, tol: float = 1e-9, seed: int = 1) -> CheckResult:
    """T(b)h = R(h)b, annihilation of exact coefficients, and root extraction."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, 5))
        n = 2 * int(rng.integers(k, 15)) + 1
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        h = rng.standard_normal(k + 1) + 1j * rng.standard_normal(k + 1)
        worst = max(worst, float(np.linalg.norm(toeplitz_of(b, k + 1) @ h - right_dual_of(h, n) @ b)))
        az = np.sort(rng.uniform(0, 2 * np.pi, k))
        coeffs = fourier_coefficients(az, 1.0, FourierTruncation((n - 1) // 2))
        filt = annihilating_filter(az)
        worst = max(worst, float(np.linalg.norm(toeplitz_of(coeffs, k + 1) @ filt)))
        err = np.angle(np.exp(1j * (extract_azimuths(filt) - az)))
        worst = max(worst, float(np.abs(err).max()))
    return CheckResult("annihilation_identities", worst <= tol, worst, tol)


@contextlib.contextmanager
def perturbed_bessel(amount: float):
    """Temporarily add ``amount`` to every Bessel value (fault injection)."""
    original = frimap.bessel_j_orders
    if amount == 0:
        yield
        return

    def shifted(max_order, x):
        return original(max_order, x) + amount

    frimap.bessel_j_orders = shifted
    try:
        yield
    finally:
        frimap.bessel_j_orders = original


def run_selftest(bessel_perturbation: float = 0.0) -> list:
    with perturbed_bessel(bessel_perturbation):
        return [check_bessel(), check_forward_model(), check_annihilation()]
