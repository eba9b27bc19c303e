"""Grid-search wideband baselines: incoherent MUSIC and SRP-PHAT."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .geometry import ArrayGeometry
from .spectral import SnapshotTensor, covariance

GRID_SIZE = 3600
MIN_PEAK_SEPARATION = 2  # grid steps


@dataclass(frozen=True)
class AngularGrid:
    resolution: int = GRID_SIZE

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 4:
            raise ParameterError("grid resolution must be an integer >= 4")

    @property
    def values(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.resolution) / self.resolution

    @property
    def step(self) -> float:
        return 2 * np.pi / self.resolution


@lru_cache(maxsize=256)
def _steering(geom: ArrayGeometry, omega: float, resolution: int) -> np.ndarray:
    theta = AngularGrid(resolution).values
    p = np.stack([np.cos(theta), np.sin(theta)])
    v = np.exp(-1j * omega * (geom.positions @ p) / geom.speed_of_sound)
    v.setflags(write=False)
    return v


def steering_vectors(geom: ArrayGeometry, omega: float, grid: AngularGrid) -> np.ndarray:
    """Array response exp(-j omega <p(theta), r_q> / c), shape (Q, grid)."""
    return _steering(geom, float(omega), grid.resolution)


def _check(snap, geom, bands, num_sources, grid):
    if num_sources < 1:
        raise ParameterError("number of sources must be >= 1")
    if snap.num_channels != geom.num_mics:
        raise ParameterError(
            f"snapshots have {snap.num_channels} channels, geometry has {geom.num_mics}"
        )
    if len(bands) == 0:
        raise ParameterError("band list is empty")
    if grid.resolution < 4 * num_sources:
        raise ParameterError("grid resolution must be at least 4K")


def find_peaks(values: np.ndarray, count: int, min_separation: int = MIN_PEAK_SEPARATION) -> np.ndarray:
    """Indices of the ``count`` largest circular local maxima.

    Ties go to the larger value, then the smaller index. Candidates closer
    than ``min_separation`` grid steps to an accepted peak are skipped; if
    there are too few local maxima the remaining grid points fill in.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    left, right = np.roll(values, 1), np.roll(values, -1)
    is_max = (values >= left) & (values > right)
    order = np.lexsort((np.arange(n), -values))
    candidates = [i for i in order if is_max[i]] + [i for i in order if not is_max[i]]
    chosen = []
    for i in candidates:
        if all(min(abs(i - j), n - abs(i - j)) >= min_separation for j in chosen):
            chosen.append(i)
            if len(chosen) == count:
                break
    return np.array(chosen, dtype=int)


def peak_to_mean(spectrum: np.ndarray) -> float:
    """Peak over mean of a nonnegative-mean spectrum (1 for a flat spectrum)."""
    spectrum = np.asarray(spectrum, dtype=float)
    mean = spectrum.mean()
    if not mean > 0:
        return 1.0
    return float(spectrum.max() / mean)


def music_pseudospectrum(snap, geom, bands, num_sources, grid) -> np.ndarray:
    q = geom.num_mics
    total = np.zeros(grid.resolution)
    for band in bands:
        cov = covariance(snap, int(band))
        scale = np.trace(cov).real
        if scale > 0:
            cov = cov / scale
        _, vecs = np.linalg.eigh(cov)
        noise = vecs[:, : q - num_sources]
        proj = noise.conj().T @ steering_vectors(geom, snap.omega(int(band)), grid)
        denom = np.sum(np.abs(proj) ** 2, axis=0)
        spec = 1.0 / np.maximum(denom, 1e-300)
        total += spec / spec.max()
    return total / len(bands)


def music_incoherent(
    snap: SnapshotTensor,
    geom: ArrayGeometry,
    bands,
    num_sources: int,
    grid: AngularGrid | None = None,
    return_spectrum: bool = False,
):
    """Average of per-band max-normalized MUSIC pseudospectra, K largest peaks."""
    grid = grid or AngularGrid()
    _check(snap, geom, bands, num_sources, grid)
    if num_sources >= geom.num_mics:
        raise ParameterError("MUSIC needs fewer sources than microphones")
    spectrum = music_pseudospectrum(snap, geom, bands, num_sources, grid)
    az = np.sort(grid.values[find_peaks(spectrum, num_sources)])
    return (az, spectrum) if return_spectrum else az


def srp_response(snap, geom, bands, grid) -> np.ndarray:
    """Steered power v^H P v of the phase-transformed covariance P, summed over bands."""
    total = np.zeros(grid.resolution)
    for band in bands:
        cov = covariance(snap, int(band))
        mag = np.abs(cov)
        phat = np.divide(cov, mag, out=np.zeros_like(cov), where=mag > 0)
        v = steering_vectors(geom, snap.omega(int(band)), grid)
        total += np.sum(v.conj() * (phat @ v), axis=0).real
    return total


def srp_phat(
    snap: SnapshotTensor,
    geom: ArrayGeometry,
    bands,
    num_sources: int,
    grid: AngularGrid | None = None,
    return_spectrum: bool = False,
):
    """Steered response power with phase transform, summed over bands."""
    grid = grid or AngularGrid()
    _check(snap, geom, bands, num_sources, grid)
    response = srp_response(snap, geom, bands, grid)
    az = np.sort(grid.values[find_peaks(response, num_sources)])
    return (az, response) if return_spectrum else az
