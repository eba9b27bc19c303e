"""Uniform estimator interface: (snapshots, geometry, bands, K, options) -> estimate."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .errors import ParameterError
from .frimap import build_mapping, choose_truncation, max_truncation, TRUNCATION_BUFFER
from .geometry import ArrayGeometry
from .solver import DoaEstimate, SolverConfig, solve
from .spectral import SnapshotTensor, estimate_visibilities


@dataclass
class EstimatorResult:
    name: str
    azimuths: np.ndarray
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"estimator": self.name, "azimuths": [float(v) for v in self.azimuths], **self.details}


def usable_frequency_limit(geom: ArrayGeometry) -> float:
    """Highest frequency (Hz) whose default truncation fits within Q(Q-1) measurements."""
    room = max_truncation(geom.num_mics) - TRUNCATION_BUFFER
    if room < 0:
        return 0.0
    max_norm = float(geom.baselines.norms.max())
    return room / max_norm / (2 * np.pi)


def frida(
    snap: SnapshotTensor,
    geom: ArrayGeometry,
    bands,
    num_sources: int,
    solver: SolverConfig | dict | None = None,
    seed: int = 0,
    accurate_truncation: bool = False,
) -> EstimatorResult:
    if isinstance(solver, dict):
        solver = SolverConfig(**solver)
    measurements = estimate_visibilities(snap, bands)
    omega_max = max(m.omega for m in measurements)
    limit = usable_frequency_limit(geom)
    if omega_max > 2 * np.pi * limit:
        warnings.warn(
            f"band at {omega_max / (2 * np.pi):.0f} Hz exceeds the {limit:.0f} Hz this array supports; "
            "the model order is capped and accuracy will suffer (restrict freq_range)"
        )
    trunc = choose_truncation(geom, omega_max, num_sources, accurate=accurate_truncation)
    mappings = [build_mapping(geom, m.omega, trunc) for m in measurements]
    est: DoaEstimate = solve(measurements, mappings, num_sources, solver, rng_seed=seed)
    details = est.to_dict()
    details.pop("azimuths")
    details.pop("filter", None)
    return EstimatorResult("frida", est.azimuths, details)


def music(snap, geom, bands, num_sources, grid: int = baselines.GRID_SIZE, **_) -> EstimatorResult:
    g = baselines.AngularGrid(grid)
    az, spectrum = baselines.music_incoherent(snap, geom, bands, num_sources, g, return_spectrum=True)
    return EstimatorResult("music", az, {"peak_to_mean": baselines.peak_to_mean(spectrum)})


def srp_phat(snap, geom, bands, num_sources, grid: int = baselines.GRID_SIZE, **_) -> EstimatorResult:
    g = baselines.AngularGrid(grid)
    az, spectrum = baselines.srp_phat(snap, geom, bands, num_sources, g, return_spectrum=True)
    ratio = baselines.peak_to_mean(spectrum)
    return EstimatorResult(
        "srp_phat", az, {"peak_to_mean": ratio, "low_confidence": bool(ratio < 1.5)}
    )


ESTIMATORS = {"frida": frida, "music": music, "srp_phat": srp_phat}


def get_estimator(name: str):
    try:
        return ESTIMATORS[name]
    except KeyError:
        raise ParameterError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None
