"""STFT snapshots, band selection and cross-correlation (visibility) estimates."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .errors import ParameterError
from .geometry import ordered_pairs
from .sim import MultichannelSignal

FFT_SIZE = 256


@dataclass(frozen=True)
class SnapshotTensor:
    """STFT coefficients indexed (snapshot, channel, bin)."""

    frames: np.ndarray
    fft_size: int
    sample_rate: float

    @property
    def num_snapshots(self) -> int:
        return self.frames.shape[0]

    @property
    def num_channels(self) -> int:
        return self.frames.shape[1]

    @property
    def bin_frequencies(self) -> np.ndarray:
        """Angular frequency of every bin, rad/s."""
        return 2 * np.pi * np.arange(self.fft_size // 2 + 1) * self.sample_rate / self.fft_size

    def omega(self, band: int) -> float:
        return float(2 * np.pi * band * self.sample_rate / self.fft_size)

    def subset(self, channels) -> "SnapshotTensor":
        return SnapshotTensor(self.frames[:, list(channels), :], self.fft_size, self.sample_rate)


@dataclass(frozen=True)
class SubbandMeasurement:
    """Cross-correlations of one band over all ordered pairs (q, q'), q != q'.

    ``variance`` is the per-entry variance of ``a`` estimated from two
    disjoint halves of the snapshots (``None`` when not available).
    """

    omega: float
    a: np.ndarray
    band: int | None = None
    variance: float | None = None

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "omega": self.omega,
            "variance": self.variance,
            "real": self.a.real.tolist(),
            "imag": self.a.imag.tolist(),
        }


def analysis_window(fft_size: int) -> np.ndarray:
    """Periodic Hann scaled so a unit sine at a bin center has unit magnitude."""
    w = get_window("hann", fft_size)
    return 2 * w / w.sum()


def stft(sig: MultichannelSignal, fft_size: int = FFT_SIZE) -> SnapshotTensor:
    """Non-overlapping Hann-windowed frames.

    Coefficients use the exp(+j omega t) analysis kernel, so a channel delayed
    by tau carries the phase exp(+j omega tau). Together with azimuths that
    point towards the source this makes the cross-correlations follow
    exp(-j omega <p, dr>).
    """
    if int(fft_size) != fft_size or fft_size < 2 or fft_size % 2:
        raise ParameterError("fft_size must be an even integer >= 2")
    n_frames = len(sig) // fft_size
    if n_frames < 1:
        raise ParameterError(f"signal of {len(sig)} samples is shorter than fft_size={fft_size}")
    x = sig.channels[:, : n_frames * fft_size].reshape(sig.num_channels, n_frames, fft_size)
    spec = np.conj(np.fft.rfft(x * analysis_window(fft_size), axis=-1))
    return SnapshotTensor(np.ascontiguousarray(spec.transpose(1, 0, 2)), int(fft_size), sig.sample_rate)


def band_power(snap: SnapshotTensor) -> np.ndarray:
    return np.sum(np.abs(snap.frames) ** 2, axis=(0, 1))


def select_bands(
    snap: SnapshotTensor,
    count: int,
    policy: str = "max-power",
    bands=None,
    freq_range: tuple | None = None,
) -> list:
    """Choose sub-band bin indices.

    ``max-power`` keeps the ``count`` most energetic bins (DC and Nyquist
    excluded, ties to the lower bin). ``freq_range`` (Hz, inclusive)
    further restricts the candidates. ``explicit-list`` validates ``bands``.
    """
    nyquist = snap.fft_size // 2
    if policy == "explicit-list":
        if bands is None or len(bands) == 0:
            raise ParameterError("explicit-list policy needs a nonempty band list")
        out = [int(b) for b in bands]
        for b in out:
            if not 0 < b < nyquist:
                raise ParameterError(f"band {b} outside 1..{nyquist - 1}")
        return out
    if policy != "max-power":
        raise ParameterError(f"unknown band policy {policy!r}")
    if int(count) != count or not 1 <= count <= nyquist - 1:
        raise ParameterError(f"band count must be in 1..{nyquist - 1}")
    candidates = np.arange(1, nyquist)
    if freq_range is not None:
        hz = candidates * snap.sample_rate / snap.fft_size
        lo, hi = freq_range
        candidates = candidates[(hz >= lo) & (hz <= hi)]
        if candidates.size < count:
            raise ParameterError(
                f"only {candidates.size} bins in {lo:g}-{hi:g} Hz, {count} requested"
            )
    power = band_power(snap)[candidates]
    order = np.argsort(-power, kind="stable")
    return sorted(int(b) for b in candidates[order[:count]])


def covariance(snap: SnapshotTensor, band: int, frames=slice(None)) -> np.ndarray:
    """Sample covariance C[q, q'] = mean_n Y_q conj(Y_q'), exactly Hermitian."""
    y = snap.frames[frames, :, band]
    c = y.T @ y.conj() / y.shape[0]
    return (c + c.conj().T) / 2


def estimate_visibilities(snap: SnapshotTensor, bands) -> list:
    if bands is None or len(bands) == 0:
        raise ParameterError("band list is empty")
    n = snap.num_snapshots
    if n < 2:
        raise ParameterError("at least two snapshots are required")
    pairs = ordered_pairs(snap.num_channels)
    i, j = pairs[:, 0], pairs[:, 1]
    n1 = n // 2
    scale = n * (1.0 / n1 + 1.0 / (n - n1))
    out = []
    for b in bands:
        b = int(b)
        a = covariance(snap, b)[i, j]
        d = covariance(snap, b, slice(0, n1))[i, j] - covariance(snap, b, slice(n1, None))[i, j]
        out.append(SubbandMeasurement(snap.omega(b), a, b, float(np.mean(np.abs(d) ** 2) / scale)))
    return out


def dump_measurements(measurements, path=None) -> str:
    text = json.dumps({"schema_version": 1, "bands": [m.to_dict() for m in measurements]})
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
