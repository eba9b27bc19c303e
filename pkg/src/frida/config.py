"""Experiment configuration: strict JSON-compatible dataclasses and presets.

Every field has an explicit default so the dumped effective configuration
fully describes a run. Angles are given in degrees in configuration files
and stored in radians in result files.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ParameterError
from .geometry import ArrayGeometry, build_triangular_array, load_geometry
from .sim import SAMPLE_RATE
from .spectral import FFT_SIZE

SCHEMA_VERSION = 1
ESTIMATOR_NAMES = ("frida", "music", "srp_phat")
SWEEP_KINDS = ("snr", "separation")


@dataclass
class GeometrySpec:
    """``name`` is ``"triangle"`` or a path to a geometry JSON file."""

    name: str = "triangle"
    edge_length: float = 0.30
    mics_per_edge: int = 8
    subset: list | None = None

    def build(self) -> ArrayGeometry:
        if self.name == "triangle":
            geom = build_triangular_array(self.edge_length, self.mics_per_edge)
        else:
            geom = load_geometry(self.name)
        if self.subset is not None:
            if len(set(self.subset)) != len(self.subset):
                raise ParameterError("geometry subset has repeated indices")
            if not all(0 <= int(i) < geom.num_mics for i in self.subset):
                raise ParameterError(f"geometry subset index outside 0..{geom.num_mics - 1}")
            geom = geom.subset([int(i) for i in self.subset])
        return geom


@dataclass
class ScenarioSpec:
    """Synthetic scene. ``azimuths_deg=None`` draws random azimuths per trial
    at least ``min_separation_deg`` apart. ``snr_db`` applies to single
    estimate runs (``None`` means noiseless); sweeps set their own SNR."""

    num_sources: int = 1
    azimuths_deg: list | None = None
    min_separation_deg: float = 0.0
    signal_kind: str = "white-noise"
    snapshots: int = 256
    fft_size: int = FFT_SIZE
    sample_rate: float = SAMPLE_RATE
    snr_db: float | None = 20.0

    def validate(self):
        if self.num_sources < 1:
            raise ParameterError("scenario.num_sources must be >= 1")
        if self.azimuths_deg is not None and len(self.azimuths_deg) != self.num_sources:
            raise ParameterError("scenario.azimuths_deg must list num_sources angles")
        if self.signal_kind != "white-noise":
            raise ParameterError("synthetic scenarios support signal_kind 'white-noise' only")
        if self.snapshots < 2:
            raise ParameterError("scenario.snapshots must be >= 2")
        if self.min_separation_deg < 0 or self.min_separation_deg * self.num_sources >= 360:
            raise ParameterError("scenario.min_separation_deg cannot be satisfied")

    @property
    def duration_samples(self) -> int:
        return int(self.snapshots * self.fft_size)


@dataclass
class EstimatorSpec:
    """One estimator and its band selection.

    ``freq_range`` is ``[lo, hi]`` in Hz; ``hi`` may be ``"usable"`` for the
    highest frequency the array's measurement count supports. ``options``
    go to the estimator (``solver`` and ``accurate_truncation`` for FRIDA,
    ``grid`` for the baselines).
    """

    name: str = "frida"
    bands: int = 20
    band_policy: str = "max-power"
    band_list: list | None = None
    freq_range: list | None = None
    options: dict = field(default_factory=dict)

    def validate(self):
        if self.name not in ESTIMATOR_NAMES:
            raise ParameterError(f"unknown estimator {self.name!r}; choose from {list(ESTIMATOR_NAMES)}")
        if self.band_policy not in ("max-power", "explicit-list"):
            raise ParameterError(f"unknown band policy {self.band_policy!r}")
        if self.freq_range is not None and len(self.freq_range) != 2:
            raise ParameterError("freq_range must be [lo, hi]")
        allowed = {"frida": {"solver", "accurate_truncation"}}.get(self.name, {"grid"})
        unknown = set(self.options) - allowed
        if unknown:
            raise ParameterError(f"unknown options for {self.name}: {sorted(unknown)}")


@dataclass
class SweepSpec:
    """``kind="snr"``: ``values`` are SNRs in dB, ``trials`` random trials each.
    ``kind="separation"``: ``values`` are separations in degrees, each run
    over ``phi_count`` start angles times ``trials_per_phi`` noise draws at
    ``snr_db``; success means an error below half the separation."""

    kind: str = "snr"
    values: list = field(default_factory=lambda: [20.0])
    trials: int = 50
    phi_count: int = 20
    trials_per_phi: int = 5
    snr_db: float = 0.0
    success_tolerance_deg: float = 5.0

    def validate(self):
        if self.kind not in SWEEP_KINDS:
            raise ParameterError(f"unknown sweep kind {self.kind!r}; choose from {list(SWEEP_KINDS)}")
        if len(self.values) == 0:
            raise ParameterError("sweep.values is empty")
        if self.kind == "snr" and self.trials < 1:
            raise ParameterError("sweep.trials must be >= 1")
        if self.kind == "separation":
            if self.phi_count < 1 or self.trials_per_phi < 1:
                raise ParameterError("phi_count and trials_per_phi must be >= 1")
            if any(not 0 < float(v) < 180 for v in self.values):
                raise ParameterError("separations must lie in (0, 180) degrees")
        if not self.success_tolerance_deg > 0:
            raise ParameterError("sweep.success_tolerance_deg must be positive")

    @property
    def trials_per_value(self) -> int:
        return self.trials if self.kind == "snr" else self.phi_count * self.trials_per_phi


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    estimators: list = field(
        default_factory=lambda: [EstimatorSpec("frida"), EstimatorSpec("music"), EstimatorSpec("srp_phat")]
    )
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output_dir: str = "results"
    workers: int | None = None

    def validate(self) -> "ExperimentConfig":
        if not self.estimators:
            raise ParameterError("estimator list is empty")
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise ParameterError("estimator names must be unique")
        for spec in self.estimators:
            spec.validate()
        self.scenario.validate()
        self.sweep.validate()
        if self.sweep.kind == "separation" and self.scenario.num_sources != 2:
            raise ParameterError("separation sweeps need scenario.num_sources = 2")
        if self.workers is not None and self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError("seed must be a nonnegative integer")
        return self

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}


_NESTED = {
    (ExperimentConfig, "geometry"): GeometrySpec,
    (ExperimentConfig, "scenario"): ScenarioSpec,
    (ExperimentConfig, "sweep"): SweepSpec,
}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ParameterError(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ParameterError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        if sub is not None:
            value = _build(sub, value, f"{where}.{key}")
        elif cls is ExperimentConfig and key == "estimators":
            if not isinstance(value, list):
                raise ParameterError("estimators must be a list")
            value = [
                _build(EstimatorSpec, {"name": v} if isinstance(v, str) else v, f"estimators[{i}]")
                for i, v in enumerate(value)
            ]
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ParameterError(f"bad value in {where}: {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParameterError(f"unsupported config schema_version {version}")
    try:
        return _build(ExperimentConfig, data, "config").validate()
    except TypeError as exc:
        raise ParameterError(f"invalid config value: {exc}") from None


def load_config(source) -> ExperimentConfig:
    """Load a preset by name or a JSON file by path."""
    if isinstance(source, str) and source in PRESETS and not Path(source).exists():
        return preset(source)
    path = Path(source)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParameterError(f"config file not found: {path} (presets: {sorted(PRESETS)})") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config file {path} is not valid JSON: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path=None) -> str:
    text = json.dumps(cfg.to_dict(), indent=2, sort_keys=True, allow_nan=False)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


_BASELINES = [{"name": "music", "bands": 20}, {"name": "srp_phat", "bands": 20}]

PRESETS = {
    "snr-desk": {
        "name": "snr-desk",
        "scenario": {"num_sources": 1},
        "estimators": [{"name": "frida", "bands": 20}, *_BASELINES],
        "sweep": {"kind": "snr", "values": [-20.0, -15.0, -10.0, -5.0, 0.0, 10.0, 20.0], "trials": 50},
    },
    "separation-desk": {
        "name": "separation-desk",
        "scenario": {"num_sources": 2},
        "estimators": [{"name": "frida", "bands": 20}, *_BASELINES],
        "sweep": {
            "kind": "separation",
            "values": [2.8, 5.6, 11.2, 22.5, 45.0, 90.0],
            "phi_count": 20,
            "trials_per_phi": 5,
            "snr_db": 0.0,
        },
    },
    "separation-full": {
        "name": "separation-full",
        "scenario": {"num_sources": 2},
        "estimators": [{"name": "frida", "bands": 20}, *_BASELINES],
        "sweep": {
            "kind": "separation",
            "values": [2.8, 5.6, 11.2, 22.5, 45.0, 90.0],
            "phi_count": 120,
            "trials_per_phi": 10,
            "snr_db": 0.0,
        },
    },
    # ten sources on a nine-microphone subset; bands from the upper part of
    # the frequency range the nine microphones can support
    "many-sources-desk": {
        "name": "many-sources-desk",
        "geometry": {"subset": [0, 3, 7, 8, 11, 15, 16, 19, 23]},
        "scenario": {"num_sources": 10, "min_separation_deg": 15.0},
        "estimators": [{"name": "frida", "bands": 20, "freq_range": [3000.0, "usable"]}],
        "sweep": {"kind": "snr", "values": [20.0], "trials": 10, "success_tolerance_deg": 2.0},
    },
}


def preset(name: str) -> ExperimentConfig:
    try:
        data = PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return config_from_dict(copy.deepcopy(data))


def degrees_to_radians(values) -> list:
    return [math.radians(float(v)) for v in values]
