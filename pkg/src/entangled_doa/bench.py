"""Monte-Carlo evaluation: RMSE, resolution probability and detection rate.

Trial ``q`` of a sweep point draws its scenario from ``(seed, q)``, so the
same trials are reused across sweep values and results do not depend on how
trials are spread over workers.
"""

import csv
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed

from ._validation import DomainError, InvalidInputError
from .array import generate_scenario
from .decomposer import NumericalError, SolverParams, run_normalized
from .detector import detect
from .doa import DEFAULT_GRID_STEP, default_grid, estimate_doas, music_spectrum

logger = logging.getLogger(__name__)

RESOLUTION_THRESHOLD_DEG = 0.5
SWEEP_AXES = ("snr_db", "snapshots")
CSV_COLUMNS = ("sweep_value", "rmse_deg", "res_prob", "det_rate", "q", "convergence_rate")


@dataclass
class TrialOutcome:
    trial_index: int
    doa_abs_errors_deg: list
    resolved: bool
    detection_correct: bool
    solver_converged: bool
    wall_time: float
    estimated_doas_deg: list
    detected_indices: list
    true_indices: list
    failed: bool = False
    error: str = ""


@dataclass
class MetricsReport:
    rmse_deg: float
    res_prob: float
    det_rate: float
    num_trials: int
    sweep_value: float = math.nan
    convergence_rate: float = math.nan
    n_succ: int = 0
    n_detec: int = 0

    def csv_row(self):
        return [
            repr(float(self.sweep_value)),
            repr(float(self.rmse_deg)),
            repr(float(self.res_prob)),
            repr(float(self.det_rate)),
            self.num_trials,
            repr(float(self.convergence_rate)),
        ]


def match_errors(estimated, truth):
    """Absolute errors under the assignment minimising the total error.

    Exhaustive over permutations, which is fine for the handful of sources
    considered here.  Returned in the order of ``truth``.
    """
    est = np.asarray(estimated, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise DomainError("estimate and truth must have the same number of angles")
    best, best_err = None, math.inf
    for perm in itertools.permutations(range(tru.size)):
        err = np.abs(est[list(perm)] - tru)
        total = err.sum()
        if total < best_err:
            best, best_err = err, total
    return best


def run_trial(config, params=None, trial_index=0, resolution_threshold_deg=RESOLUTION_THRESHOLD_DEG,
              grid_step=DEFAULT_GRID_STEP, h_factor=10.0, normalize="snapshots"):
    """Simulate one scenario and run decomposition, MUSIC and detection on it."""
    params = params or SolverParams(gamma_max=config.gamma_max)
    t0 = time.perf_counter()
    scenario = generate_scenario(config, trial_index)
    truth = list(config.doas_deg)
    true_idx = [int(i) for i in scenario.distorted_indices]
    try:
        res = run_normalized(scenario.measurements, params, normalize=normalize)
        spec = music_spectrum(res.Z_hat, config.num_sources, default_grid(grid_step),
                              config.spacing_wavelengths)
        est = estimate_doas(spec, config.num_sources).doas_deg
        report = detect(res.gamma_hat, h_factor)
    except (InvalidInputError, NumericalError, DomainError) as exc:
        logger.warning("trial %d failed: %s", trial_index, exc)
        K = config.num_sources
        return TrialOutcome(trial_index, [math.inf] * K, False, False, False,
                            time.perf_counter() - t0, [math.nan] * K, [], true_idx,
                            failed=True, error=str(exc))
    errors = match_errors(est, truth)
    detected = [int(i) for i in report.distorted_indices]
    return TrialOutcome(
        trial_index=trial_index,
        doa_abs_errors_deg=[float(e) for e in errors],
        resolved=bool(np.max(errors) <= resolution_threshold_deg),
        detection_correct=detected == true_idx,
        solver_converged=bool(res.converged),
        wall_time=time.perf_counter() - t0,
        estimated_doas_deg=[float(v) for v in est],
        detected_indices=detected,
        true_indices=true_idx,
    )


def aggregate(outcomes, resolution_threshold_deg=RESOLUTION_THRESHOLD_DEG, sweep_value=math.nan):
    """RMSE over all trials and sources (squared errors), ResProb and DetRate."""
    outcomes = list(outcomes)
    if not outcomes:
        raise DomainError("cannot aggregate an empty list of trials")
    errs = np.array([o.doa_abs_errors_deg for o in outcomes], dtype=float)
    Q = len(outcomes)
    n_succ = sum(1 for o in outcomes if np.max(o.doa_abs_errors_deg) <= resolution_threshold_deg)
    n_detec = sum(1 for o in outcomes if o.detection_correct)
    n_conv = sum(1 for o in outcomes if o.solver_converged)
    return MetricsReport(
        # exactly rounded sum, so the value does not depend on trial order
        rmse_deg=math.sqrt(math.fsum((errs ** 2).ravel()) / errs.size),
        res_prob=n_succ / Q,
        det_rate=n_detec / Q,
        num_trials=Q,
        sweep_value=float(sweep_value),
        convergence_rate=n_conv / Q,
        n_succ=n_succ,
        n_detec=n_detec,
    )


def run_trials(config, params, num_trials, n_jobs=1, **trial_kwargs):
    """Run trials ``0..num_trials-1``; output order is by trial index."""
    if n_jobs == 1:
        return [run_trial(config, params, q, **trial_kwargs) for q in range(num_trials)]
    return Parallel(n_jobs=n_jobs)(
        delayed(run_trial)(config, params, q, **trial_kwargs) for q in range(num_trials)
    )


def sweep(base_config, params, sweep_axis, values, num_trials, n_jobs=1,
          resolution_threshold_deg=RESOLUTION_THRESHOLD_DEG, return_outcomes=False, **trial_kwargs):
    """One :class:`MetricsReport` per sweep value.

    ``sweep_axis`` is ``"snr_db"`` or ``"snapshots"``.
    """
    if sweep_axis not in SWEEP_AXES:
        raise DomainError(f"sweep axis must be one of {SWEEP_AXES}, got {sweep_axis!r}")
    values = list(values)
    if not values:
        raise DomainError("sweep needs at least one value")
    if num_trials < 1:
        raise DomainError("num_trials must be positive")
    reports, all_outcomes = [], []
    for v in values:
        v = int(v) if sweep_axis == "snapshots" else float(v)
        cfg = base_config.replace(**{sweep_axis: v})
        outcomes = run_trials(cfg, params, num_trials, n_jobs,
                              resolution_threshold_deg=resolution_threshold_deg, **trial_kwargs)
        reports.append(aggregate(outcomes, resolution_threshold_deg, sweep_value=v))
        all_outcomes.append(outcomes)
    if return_outcomes:
        return reports, all_outcomes
    return reports


def write_reports_csv(reports, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def reports_to_json(reports, outcomes, config_echo, include_timing=False):
    """Full per-trial record; wall times are dropped unless asked for so the
    document is reproducible byte for byte."""
    points = []
    for rep, outs in zip(reports, outcomes):
        trials = []
        for o in outs:
            d = asdict(o)
            if not include_timing:
                d.pop("wall_time")
            trials.append(d)
        points.append({"report": asdict(rep), "trials": trials})
    return json.dumps(_jsonable({"config": config_echo, "sweep": points}), indent=1) + "\n"
