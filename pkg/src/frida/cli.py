"""Command-line interface: ``frida estimate | benchmark | selftest``.

Exit codes: 0 success, 1 numerical or check failure, 2 usage or configuration error.
Angles are printed in degrees and serialized in radians.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_from_dict, dump_config, load_config, PRESETS
from .errors import FridaError, NumericalFailure
from .harness import choose_bands, random_azimuths, run_sweep
from .estimators import get_estimator
from .selftest import run_selftest
from .sim import SourceScenario, add_noise, read_wav, simulate_farfield
from .spectral import stft

log = logging.getLogger("frida")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _common(parser: argparse.ArgumentParser, workers: bool = False):
    parser.add_argument("--config", help=f"JSON config file or preset ({', '.join(sorted(PRESETS))})")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--output-dir", help="directory for result files (overrides the config)")
    parser.add_argument("--dry-run", action="store_true", help="print the effective config and exit")
    parser.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    if workers:
        parser.add_argument("--workers", type=int, help="worker processes (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frida", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run every configured estimator once")
    _common(est)
    est.add_argument("--input", help="multichannel WAV file, one channel per microphone")
    est.add_argument("--azimuths", type=float, nargs="+", metavar="DEG", help="synthetic source azimuths")
    est.add_argument("--snr", type=float, help="synthetic SNR in dB")

    bench = sub.add_parser("benchmark", help="run a Monte Carlo sweep")
    _common(bench, workers=True)

    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.add_argument("--json", action="store_true", help="machine-readable report")
    st.add_argument("--inject-bessel-perturbation", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _resolve_config(args, default=None) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else (default or ExperimentConfig())
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "azimuths", None):
        cfg.scenario.azimuths_deg = list(args.azimuths)
        cfg.scenario.num_sources = len(args.azimuths)
    if getattr(args, "snr", None) is not None:
        cfg.scenario.snr_db = args.snr
    # round trip through the schema so overrides are validated too
    return config_from_dict(cfg.to_dict())


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_estimate(args) -> int:
    cfg = _resolve_config(args)
    if args.dry_run:
        print(dump_config(cfg))
        return EXIT_OK
    geom = cfg.geometry.build()
    scen = cfg.scenario
    if args.input:
        sig = read_wav(args.input, expected_channels=geom.num_mics)
        truth = None
    else:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
        if scen.azimuths_deg is not None:
            truth = np.sort(np.mod(np.radians(scen.azimuths_deg), 2 * np.pi))
        else:
            truth = random_azimuths(rng, scen.num_sources, math.radians(scen.min_separation_deg))
        sig_seed, noise_seed = (int(s) for s in rng.integers(0, 2**32, 2))
        scenario = SourceScenario(tuple(truth), scen.duration_samples, scen.sample_rate, scen.signal_kind)
        sig = simulate_farfield(geom, scenario, sig_seed)
        if scen.snr_db is not None:
            sig = add_noise(sig, scen.snr_db, noise_seed)
    snap = stft(sig, scen.fft_size)

    results = []
    for spec in cfg.estimators:
        bands = choose_bands(snap, geom, spec)
        options = dict(spec.options)
        if spec.name == "frida":
            options["seed"] = cfg.seed
        t0 = time.perf_counter()
        res = get_estimator(spec.name)(snap, geom, bands, scen.num_sources, **options)
        results.append((res, bands, time.perf_counter() - t0))

    report = {
        "schema_version": 1,
        "units": {"angles": "rad"},
        "truth": None if truth is None else truth.tolist(),
        "results": [{**res.to_dict(), "bands": bands} for res, bands, _ in results],
    }
    if args.json:
        _print_json(report)
    else:
        if truth is not None:
            print("truth (deg):", " ".join(f"{v:8.3f}" for v in np.degrees(truth)))
        for res, bands, elapsed in results:
            print(f"{res.name:>9} (deg): " + " ".join(f"{v:8.3f}" for v in np.degrees(res.azimuths)))
            if "residual" in res.details:
                powers = np.asarray(res.details["powers"]).mean(axis=1)
                print(f"{'':>9}  residual {res.details['residual']:.4e}, mean powers "
                      + " ".join(f"{p:.3g}" for p in powers))
            log.info("%s took %.2f s on %d bands", res.name, elapsed, len(bands))
    if args.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "estimate.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
        dump_config(cfg, out / "estimate.config.json")
    return EXIT_OK


def _summary(result) -> str:
    unit = "dB" if result.kind == "snr" else "deg"
    lines = [f"{'value (' + unit + ')':>14} " + " ".join(f"{n:>24}" for n in result.estimators)]
    lines.append(f"{'':>14} " + " ".join(f"{'mean/median err, recov':>24}" for _ in result.estimators))
    for v in result.values:
        cells = []
        for name in result.estimators:
            p = result.point(name, v)
            cells.append(
                f"{math.degrees(p.mean_error):8.3f} {math.degrees(p.median_error):7.3f} {p.recovered_mean:6.2f}"
            )
        lines.append(f"{v:>14g} " + " ".join(f"{c:>24}" for c in cells))
    return "\n".join(lines)


def cmd_benchmark(args) -> int:
    cfg = _resolve_config(args, default=load_config("snr-desk"))
    if args.dry_run:
        print(dump_config(cfg))
        return EXIT_OK
    workers = cfg.workers or os.cpu_count() or 1
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / f"{cfg.name}.config.json")

    def progress(done, total):
        log.info("%d/%d trials", done, total)

    t0 = time.perf_counter()
    result = run_sweep(cfg, workers=workers, progress=progress)
    csv_path, json_path = result.write(out, cfg.name)
    log.info("finished in %.1f s", time.perf_counter() - t0)
    if args.json:
        _print_json({"csv": str(csv_path), "json": str(json_path), "points": [vars(p) for p in result.points]})
    else:
        print(_summary(result))
        print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    checks = run_selftest(args.inject_bessel_perturbation)
    ok = all(c.passed for c in checks)
    if args.json:
        _print_json({"passed": ok, "checks": [c.to_dict() for c in checks]})
    else:
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<26} {c.value:.3e} (tol {c.tolerance:g})")
    return EXIT_OK if ok else EXIT_FAILURE


COMMANDS = {"estimate": cmd_estimate, "benchmark": cmd_benchmark, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str), file=sys.stderr)
        return EXIT_FAILURE
    except (FridaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
