"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import dataclasses
import io
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import bench
from ._validation import DomainError, InvalidInputError
from .array import ConfigError, generate_scenario, load_scenario, scenario_to_dict
from .config import ConfigFileError, RunConfig, load_config
from .decomposer import NumericalError, run_normalized, write_trace
from .detector import detect
from .doa import default_grid, estimate_doas, music_spectrum

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("entangled_doa")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _atomic_write(path, text):
    """Write via a temporary file so a failure leaves no partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_run_config(path, args):
    try:
        cfg = load_config(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file", EXIT_IO) from None
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from None
    except ConfigFileError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    try:
        if getattr(args, "seed", None) is not None:
            cfg.array = cfg.array.replace(seed=args.seed)
        if getattr(args, "trials", None) is not None:
            if args.trials < 1:
                raise ValueError("--trials must be positive")
            cfg.bench.num_trials = args.trials
        if getattr(args, "jobs", None) is not None:
            cfg.bench.n_jobs = args.jobs
    except (ValueError, ConfigError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    return cfg


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}", EXIT_CONFIG) from None
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from None


def _matrix(rows):
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _pairs(x):
    x = np.atleast_2d(x)
    return [[[float(v.real), float(v.imag)] for v in row] for row in x]


def cmd_simulate(args):
    cfg = _load_run_config(args.config, args)
    scenario = generate_scenario(cfg.array)
    text = json.dumps(scenario_to_dict(scenario), indent=1) + "\n"
    try:
        _atomic_write(args.out, text)
    except OSError as exc:
        raise CliError(f"{args.out}: {exc}", EXIT_IO) from None
    print(cfg.to_yaml(), end="")
    return EXIT_OK


def _is_scenario_file(path):
    return path.endswith(".json")


def cmd_solve(args):
    if _is_scenario_file(args.input):
        try:
            scenario = load_scenario(args.input)
        except FileNotFoundError:
            raise CliError(f"{args.input}: no such file", EXIT_IO) from None
        except (KeyError, ValueError, ConfigError) as exc:
            raise CliError(f"{args.input}: not a scenario file ({exc})", EXIT_CONFIG) from None
        if args.config:
            cfg = _load_run_config(args.config, args)
        else:
            cfg = RunConfig()
            cfg.solver = dataclasses.replace(cfg.solver, gamma_max=scenario.config.gamma_max)
        cfg.array = scenario.config
    else:
        cfg = _load_run_config(args.input, args)
        scenario = generate_scenario(cfg.array)

    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    try:
        res = run_normalized(scenario.measurements, cfg.solver, normalize=cfg.normalize)
    except (NumericalError, InvalidInputError) as exc:
        with open(trace_path, "w", newline="") as fh:
            write_trace(getattr(exc, "trace", []), fh)
        raise CliError(f"solver failed: {exc}", EXIT_NUMERIC) from None

    with open(trace_path, "w", newline="") as fh:
        write_trace(res.trace, fh)
    K = cfg.array.num_sources
    spectrum = music_spectrum(res.Z_hat, K, default_grid(cfg.grid_step), cfg.array.spacing_wavelengths)
    est = estimate_doas(spectrum, K)
    report = detect(res.gamma_hat, cfg.h_factor)
    solution = {
        "config": cfg.to_dict(),
        "num_sources": K,
        "converged": bool(res.converged),
        "iterations": res.n_iter,
        "gamma_hat": [[float(g.real), float(g.imag)] for g in res.gamma_hat],
        "detection": {
            "num_distorted": report.num_distorted,
            "distorted_indices": [int(i) for i in report.distorted_indices],
            "gap_threshold": report.gap_threshold,
            "sorted_magnitudes": [float(v) for v in report.sorted_magnitudes],
        },
        "doas_deg": [float(v) for v in est.doas_deg],
        "doa_degenerate": bool(est.degenerate),
        "Z_hat": _pairs(res.Z_hat),
    }
    _atomic_write(os.path.join(args.out, "solution.json"), json.dumps(solution, indent=1) + "\n")
    print(f"doas_deg: {solution['doas_deg']}")
    print(f"distorted sensors: {solution['detection']['distorted_indices']}")
    return EXIT_OK


def cmd_spectrum(args):
    doc = _read_json(args.input)
    if "Z_hat" in doc:
        Z = _matrix(doc["Z_hat"])
        K = doc.get("num_sources")
        spacing = doc.get("config", {}).get("array", {}).get("spacing_wavelengths", 0.5)
    elif "measurements" in doc:
        Z = _matrix(doc["measurements"])
        K = doc["config"]["num_sources"]
        spacing = doc["config"].get("spacing_wavelengths", 0.5)
    else:
        raise CliError(f"{args.input}: contains neither Z_hat nor measurements", EXIT_CONFIG)
    if args.num_sources is not None:
        K = args.num_sources
    M = Z.shape[0]
    if K is None or not 0 < K < M:
        raise CliError(f"number of sources must satisfy 0 < K < M={M}, got {K}", EXIT_CONFIG)
    if not args.grid_step > 0:
        raise CliError("grid step must be positive", EXIT_CONFIG)
    lo = max(args.grid_min, -90.0)
    hi = min(args.grid_max, 90.0)
    grid = default_grid(args.grid_step)
    grid = grid[(grid >= lo) & (grid <= hi)]
    if grid.size == 0:
        raise CliError(f"empty angle grid [{args.grid_min}, {args.grid_max}]", EXIT_CONFIG)
    try:
        spec = music_spectrum(Z, K, grid, spacing)
    except (DomainError, InvalidInputError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    # the CSV keeps its two columns; settings go to a sidecar
    meta = {
        "input": os.path.basename(args.input),
        "num_sources": int(K),
        "grid_step": float(args.grid_step),
        "grid_min": float(grid[0]),
        "grid_max": float(grid[-1]),
        "spacing_wavelengths": float(spacing),
        "config": doc.get("config", {}),
    }
    try:
        spec.write_csv(args.out)
        _atomic_write(args.out + ".meta.json", json.dumps(meta, indent=1) + "\n")
    except OSError as exc:
        raise CliError(f"{args.out}: {exc}", EXIT_IO) from None
    return EXIT_OK


def cmd_bench(args):
    cfg = _load_run_config(args.config, args)
    if not cfg.bench.sweeps:
        raise CliError(f"{args.config}: bench.sweeps is empty", EXIT_CONFIG)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise CliError(f"{args.out}: {exc}", EXIT_IO) from None
    _atomic_write(os.path.join(args.out, "config.resolved.yaml"), cfg.to_yaml())
    write_json = cfg.bench.write_json or args.json
    for i, sw in enumerate(cfg.bench.sweeps):
        base = cfg.array.replace(**sw.overrides)
        reports, outcomes = bench.sweep(
            base, cfg.solver, sw.axis, sw.values, cfg.bench.num_trials,
            n_jobs=cfg.bench.n_jobs,
            resolution_threshold_deg=cfg.bench.resolution_threshold_deg,
            return_outcomes=True, grid_step=cfg.grid_step, h_factor=cfg.h_factor,
            normalize=cfg.normalize,
        )
        stem = os.path.join(args.out, f"sweep{i}_{sw.axis}")
        buf = io.StringIO()
        bench.write_reports_csv(reports, buf)
        _atomic_write(stem + ".csv", buf.getvalue())
        if write_json:
            _atomic_write(stem + ".json", bench.reports_to_json(reports, outcomes, cfg.to_dict()))
        print(f"sweep {i} ({sw.axis}):")
        for r in reports:
            print(f"  {sw.axis}={r.sweep_value:g}  rmse={r.rmse_deg:.4f} deg  "
                  f"res_prob={r.res_prob:.3f}  det_rate={r.det_rate:.3f}  "
                  f"converged={r.convergence_rate:.3f}  (Q={r.num_trials})")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="entangled-doa",
        description="DOA estimation and distorted-sensor detection for uniform linear arrays.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a scenario and write it as JSON")
    s.add_argument("config")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve", help="decompose a scenario, estimate DOAs, detect distorted sensors")
    s.add_argument("input", help="scenario .json file or YAML config")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.add_argument("--config", help="solver settings when INPUT is a scenario file")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("spectrum", help="write the MUSIC spectrum of a solution or scenario as CSV")
    s.add_argument("input")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--num-sources", type=int)
    s.add_argument("--grid-step", type=float, default=0.05)
    s.add_argument("--grid-min", type=float, default=-90.0)
    s.add_argument("--grid-max", type=float, default=90.0)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("bench", help="Monte-Carlo sweeps; one CSV per sweep")
    s.add_argument("config")
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--json", action="store_true", help="also write per-trial JSON records")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
