"""Seeded Monte Carlo sweeps over SNR or source separation.

Each trial draws its randomness from ``SeedSequence([seed, value_index,
trial_index])`` so results do not depend on execution order or on the number
of worker processes. Aggregation folds trials in index order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import SCHEMA_VERSION, ExperimentConfig, config_from_dict
from .errors import FridaError, ParameterError
from .estimators import get_estimator, usable_frequency_limit
from .metrics import match_and_score
from .sim import SourceScenario, add_noise, simulate_farfield
from .spectral import select_bands, stft

log = logging.getLogger(__name__)

_MAX_DRAWS = 100_000


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def random_azimuths(rng: np.random.Generator, count: int, min_separation: float) -> np.ndarray:
    """Sorted uniform azimuths with pairwise circular gaps >= ``min_separation`` (rejection sampling)."""
    for _ in range(_MAX_DRAWS):
        az = np.sort(rng.uniform(0, 2 * np.pi, count))
        if count == 1 or np.diff(np.r_[az, az[0] + 2 * np.pi]).min() >= min_separation:
            return az
    raise ParameterError("could not draw azimuths with the requested separation")


def resolve_freq_range(freq_range, geom):
    if freq_range is None:
        return None
    lo, hi = freq_range
    lo = 0.0 if lo is None else float(lo)
    if hi == "usable":
        hi = usable_frequency_limit(geom)
    elif hi is None:
        hi = math.inf
    return lo, float(hi)


def choose_bands(snap, geom, spec) -> list:
    return select_bands(
        snap,
        spec.bands,
        policy=spec.band_policy,
        bands=spec.band_list,
        freq_range=resolve_freq_range(spec.freq_range, geom),
    )


def trial_scene(cfg: ExperimentConfig, value_index: int, trial: int):
    """Truth azimuths, SNR and the seeds of one trial."""
    ss = np.random.SeedSequence([cfg.seed, value_index, trial])
    s_az, s_sig, s_noise, s_solver = ss.spawn(4)
    value = float(cfg.sweep.values[value_index])
    scen = cfg.scenario
    if cfg.sweep.kind == "snr":
        snr = value
        if scen.azimuths_deg is not None:
            truth = np.sort(np.mod(np.radians(scen.azimuths_deg), 2 * np.pi))
        else:
            truth = random_azimuths(
                np.random.default_rng(s_az), scen.num_sources, math.radians(scen.min_separation_deg)
            )
        tolerance = math.radians(cfg.sweep.success_tolerance_deg)
    else:
        snr = float(cfg.sweep.snr_db)
        phi = 2 * np.pi * (trial // cfg.sweep.trials_per_phi) / cfg.sweep.phi_count
        delta = math.radians(value)
        truth = np.sort(np.mod([phi, phi + delta], 2 * np.pi))
        tolerance = delta / 2
    return truth, snr, tolerance, _seed_int(s_sig), _seed_int(s_noise), _seed_int(s_solver)


def run_trial(cfg: ExperimentConfig, geom, value_index: int, trial: int) -> dict:
    truth, snr, tolerance, sig_seed, noise_seed, solver_seed = trial_scene(cfg, value_index, trial)
    scen = cfg.scenario
    scenario = SourceScenario(tuple(truth), scen.duration_samples, scen.sample_rate, scen.signal_kind)
    sig = simulate_farfield(geom, scenario, sig_seed)
    sig = add_noise(sig, snr, noise_seed)
    snap = stft(sig, scen.fft_size)
    record = {
        "value_index": value_index,
        "trial": trial,
        "truth": truth.tolist(),
        "snr_db": snr,
        "seeds": {"signal": sig_seed, "noise": noise_seed, "solver": solver_seed},
        "estimators": {},
    }
    for spec in cfg.estimators:
        bands = choose_bands(snap, geom, spec)
        options = dict(spec.options)
        if spec.name == "frida":
            options["seed"] = solver_seed
        entry = {"bands": bands}
        try:
            result = get_estimator(spec.name)(snap, geom, bands, len(truth), **options)
        except FridaError as exc:
            # a failed trial counts as a miss on every source
            entry.update(azimuths=None, failure=str(exc), mean_error=math.pi, recovered=0)
        else:
            report = match_and_score(truth, result.azimuths, tolerance)
            entry.update(
                azimuths=[float(v) for v in result.azimuths],
                errors=report.errors.tolist(),
                mean_error=report.mean_error,
                recovered=report.recovered,
            )
            for key in ("residual", "iterations_used", "restarts_used", "max_order", "peak_to_mean"):
                if key in result.details:
                    entry[key] = result.details[key]
        record["estimators"][spec.name] = entry
    return record


@dataclass
class SweepPoint:
    estimator: str
    value: float
    trials: int
    mean_error: float
    median_error: float
    success_rate: float
    recovered_mean: float
    all_recovered_rate: float
    failures: int = 0


@dataclass
class SweepResult:
    """Per-value aggregates (errors in radians) plus every trial record."""

    kind: str
    values: list
    estimators: list
    trial_count: int
    seed: int
    num_sources: int
    points: list = field(default_factory=list)
    trials: list = field(default_factory=list, repr=False)

    def point(self, estimator: str, value) -> SweepPoint:
        for p in self.points:
            if p.estimator == estimator and p.value == float(value):
                return p
        raise KeyError((estimator, value))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "values": self.values,
            "estimators": self.estimators,
            "trial_count": self.trial_count,
            "seed": self.seed,
            "num_sources": self.num_sources,
            "units": {"angles": "rad", "snr": "dB", "separation": "deg"},
            "points": [vars(p) for p in self.points],
            "trials": self.trials,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        columns = list(vars(self.points[0])) if self.points else []
        writer.writerow(["schema_version", "sweep", *columns])
        for p in self.points:
            writer.writerow([SCHEMA_VERSION, self.kind, *[repr(v) if isinstance(v, float) else v for v in vars(p).values()]])
        return buf.getvalue()

    def write(self, directory, stem: str) -> tuple:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = directory / f"{stem}.csv", directory / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(self.to_json())
        return csv_path, json_path


def aggregate(cfg: ExperimentConfig, records: list) -> SweepResult:
    k = len(records[0]["truth"]) if records else cfg.scenario.num_sources
    result = SweepResult(
        kind=cfg.sweep.kind,
        values=[float(v) for v in cfg.sweep.values],
        estimators=[e.name for e in cfg.estimators],
        trial_count=cfg.sweep.trials_per_value,
        seed=cfg.seed,
        num_sources=k,
        trials=records,
    )
    for index, value in enumerate(result.values):
        rows = sorted((r for r in records if r["value_index"] == index), key=lambda r: r["trial"])
        for name in result.estimators:
            entries = [r["estimators"][name] for r in rows]
            errors = np.array([e["mean_error"] for e in entries])
            recovered = np.array([e["recovered"] for e in entries])
            result.points.append(
                SweepPoint(
                    estimator=name,
                    value=value,
                    trials=len(entries),
                    mean_error=float(np.mean(errors)),
                    median_error=float(np.median(errors)),
                    success_rate=float(np.mean(recovered) / k),
                    recovered_mean=float(np.mean(recovered)),
                    all_recovered_rate=float(np.mean(recovered == k)),
                    failures=sum(1 for e in entries if e["azimuths"] is None),
                )
            )
    return result


# worker-process state, set once per process by the pool initializer
_WORKER = {}


def _init_worker(cfg_dict: dict):
    cfg = config_from_dict(cfg_dict)
    _WORKER["cfg"] = cfg
    _WORKER["geom"] = cfg.geometry.build()
    _WORKER["limits"] = threadpool_limits(1)


def _run_job(job):
    value_index, trial = job
    return run_trial(_WORKER["cfg"], _WORKER["geom"], value_index, trial)


def run_sweep(cfg: ExperimentConfig, workers: int = 1, progress=None) -> SweepResult:
    """Run every (value, trial) job and fold the results in index order."""
    cfg.validate()
    jobs = [(i, t) for i in range(len(cfg.sweep.values)) for t in range(cfg.sweep.trials_per_value)]
    records = []
    if workers <= 1:
        geom = cfg.geometry.build()
        with threadpool_limits(1):
            for job in jobs:
                records.append(run_trial(cfg, geom, *job))
                if progress:
                    progress(len(records), len(jobs))
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(cfg.to_dict(),)) as pool:
            for record in pool.map(_run_job, jobs, chunksize=1):
                records.append(record)
                if progress:
                    progress(len(records), len(jobs))
    return aggregate(cfg, records)


def snr_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    if cfg.sweep.kind != "snr":
        raise ParameterError("configuration is not an SNR sweep")
    return run_sweep(cfg, workers)


def separation_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    if cfg.sweep.kind != "separation":
        raise ParameterError("configuration is not a separation sweep")
    return run_sweep(cfg, workers)
