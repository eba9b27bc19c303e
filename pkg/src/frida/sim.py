"""Synthetic far-field microphone signals and additive white Gaussian noise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import oaconvolve

from .errors import ParameterError
from .geometry import ArrayGeometry

FD_TAPS = 201
SAMPLE_RATE = 16000


@dataclass(frozen=True)
class SourceScenario:
    """Far-field sources arriving from ``azimuths`` (radians, towards the source).

    ``signal_kind`` is ``"white-noise"`` or ``"waveform"``; the latter takes
    one row of ``waveforms`` per source, each at least as long as the padded
    simulation requires.
    """

    azimuths: tuple
    duration_samples: int
    sample_rate: float = SAMPLE_RATE
    signal_kind: str = "white-noise"
    waveforms: np.ndarray | None = None

    def __post_init__(self):
        az = np.mod(np.atleast_1d(np.asarray(self.azimuths, dtype=float)), 2 * np.pi)
        if az.size < 1:
            raise ParameterError("at least one source is required")
        if not np.all(np.isfinite(az)):
            raise ParameterError("azimuths must be finite")
        d = np.abs(az[:, None] - az[None, :])
        d = np.minimum(d, 2 * np.pi - d)
        np.fill_diagonal(d, np.inf)
        if az.size > 1 and d.min() < 1e-12:
            raise ParameterError("source azimuths must be distinct")
        if self.signal_kind not in ("white-noise", "waveform"):
            raise ParameterError(f"unknown signal kind {self.signal_kind!r}")
        if self.signal_kind == "waveform" and self.waveforms is None:
            raise ParameterError("waveform scenario needs waveforms")
        if int(self.duration_samples) != self.duration_samples or self.duration_samples < 1:
            raise ParameterError("duration_samples must be a positive integer")
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be positive")
        object.__setattr__(self, "azimuths", tuple(az.tolist()))
        object.__setattr__(self, "duration_samples", int(self.duration_samples))

    @property
    def num_sources(self) -> int:
        return len(self.azimuths)


@dataclass(frozen=True)
class MultichannelSignal:
    channels: np.ndarray  # (Q, L)
    sample_rate: float

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 2 or ch.shape[1] == 0:
            raise ParameterError("channels must be a nonempty (Q, L) array")
        if not np.all(np.isfinite(ch)):
            raise ParameterError("channels contain non-finite samples")
        object.__setattr__(self, "channels", ch)

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    def __len__(self) -> int:
        return self.channels.shape[1]


def fractional_delay_filter(frac: float, taps: int = FD_TAPS) -> np.ndarray:
    """Hann-windowed sinc taps for ``y[t] = sum_i w[i] x[t - i + taps//2]`` delayed by ``frac``."""
    half = taps // 2
    u = np.arange(-half, half + 1) - frac
    window = 0.5 * (1 + np.cos(np.pi * u / (half + 1)))
    return np.sinc(u) * window


def propagation_delays(geom: ArrayGeometry, azimuths, sample_rate: float) -> np.ndarray:
    """Delays in samples, shape (Q, K); the nearest microphone to a source hears it first."""
    az = np.atleast_1d(np.asarray(azimuths, dtype=float))
    p = np.stack([np.cos(az), np.sin(az)])
    return -(geom.positions @ p) / geom.speed_of_sound * sample_rate


def simulate_farfield(
    geom: ArrayGeometry, scenario: SourceScenario, rng_seed: int
) -> MultichannelSignal:
    fs = scenario.sample_rate
    length = scenario.duration_samples
    half = FD_TAPS // 2
    if length < FD_TAPS:
        raise ParameterError(f"duration must be at least {FD_TAPS} samples")

    delays = propagation_delays(geom, scenario.azimuths, fs)
    # common offset keeps every delay nonnegative
    delays = delays + math.ceil(float(-delays.min())) if delays.min() < 0 else delays
    lead = int(math.ceil(float(delays.max()))) + half + 1
    src_len = length + lead + half + 1

    if scenario.signal_kind == "white-noise":
        rng = np.random.default_rng(rng_seed)
        sources = rng.standard_normal((scenario.num_sources, src_len))
    else:
        sources = np.asarray(scenario.waveforms, dtype=float)
        if sources.shape[0] != scenario.num_sources or sources.shape[1] < src_len:
            raise ParameterError(
                f"waveforms must have shape ({scenario.num_sources}, >= {src_len})"
            )

    out = np.zeros((geom.num_mics, length))
    for q in range(geom.num_mics):
        for k in range(scenario.num_sources):
            whole = int(math.floor(delays[q, k]))
            taps = fractional_delay_filter(delays[q, k] - whole)
            start = lead - whole + half
            out[q] += oaconvolve(sources[k, : start + length], taps)[start : start + length]
    return MultichannelSignal(out, fs)


def add_noise(sig: MultichannelSignal, snr_db: float, rng_seed: int) -> MultichannelSignal:
    """Add i.i.d. Gaussian noise at ``snr_db`` relative to the mean channel power."""
    if math.isinf(snr_db) and snr_db > 0:
        return MultichannelSignal(sig.channels.copy(), sig.sample_rate)
    power = float(np.mean(sig.channels**2))
    sigma = math.sqrt(power * 10 ** (-snr_db / 10))
    rng = np.random.default_rng(rng_seed)
    noise = sigma * rng.standard_normal(sig.channels.shape)
    return MultichannelSignal(sig.channels + noise, sig.sample_rate)


def read_wav(path, expected_channels: int | None = None) -> MultichannelSignal:
    """Load a PCM WAV (16-bit integer or float) as a multichannel signal."""
    from scipy.io import wavfile

    path = Path(path)
    if not path.exists():
        raise ParameterError(f"audio file not found: {path}")
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    if np.issubdtype(data.dtype, np.integer):
        data = data.astype(float) / np.iinfo(data.dtype).max
    else:
        data = data.astype(float)
    if expected_channels is not None and data.shape[1] != expected_channels:
        raise ParameterError(
            f"channel count mismatch: {path} has {data.shape[1]} channels, "
            f"geometry has {expected_channels} microphones"
        )
    return MultichannelSignal(data.T, float(rate))


def write_wav(sig: MultichannelSignal, path) -> None:
    from scipy.io import wavfile

    wavfile.write(path, int(sig.sample_rate), sig.channels.T.astype(np.float32))
