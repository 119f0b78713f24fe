"""Acceptance criteria, each at its stated tolerance.

Every check appends one PASS/FAIL line that is printed in the terminal
summary (and immediately with ``-s``).  Nothing here is relaxed to make a
check pass; see the README for the criteria that fail and why.
"""

import io
import math
import time

import numpy as np
import pytest

from entangled_doa import box_lasso
from entangled_doa.array import ArrayConfig, generate_scenario
from entangled_doa.bench import run_trial, sweep, write_reports_csv
from entangled_doa.decomposer import SolverParams, objective, run, update_z
from entangled_doa.detector import detect
from entangled_doa.numerics import hermitian_inv_sqrt

from conftest import ACCEPTANCE_LINES, crandn
from test_box_lasso import dense_parts, dense_objective, grid_minimum, random_instance

DESK = ArrayConfig(num_sensors=8, num_sources=2, doas_deg=(-10.0, 10.0), snapshots=100,
                   num_distorted=3, seed=2024)


def record(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_c1_inverse_sqrt_kernel():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        M, T = int(rng.integers(1, 17)), int(rng.integers(1, 33))
        Z = crandn(rng, M, T)
        # the residual cannot beat cond(ZZ^H + mu^2 I) * eps for any method,
        # so mu is kept where that floor sits well below 1e-10
        mu = 10 ** rng.uniform(-1, 1)
        P = hermitian_inv_sqrt(Z, mu)
        A = Z @ Z.conj().T + mu * mu * np.eye(M)
        worst = max(worst, np.linalg.norm(P @ P @ A - np.eye(M)))
    elapsed = time.perf_counter() - t0
    record("C1 kernel P^2(ZZ^H+mu^2 I) = I", worst <= 1e-10 and elapsed < 5.0,
           f"max residual {worst:.2e} (<= 1e-10), {elapsed:.3f} s (< 5 s)")


def test_c2_z_update_normal_equation():
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        M, T = int(rng.integers(2, 17)), int(rng.integers(1, 201))
        Y, Zp = crandn(rng, M, T), crandn(rng, M, T)
        gamma = rng.uniform(0, 2) * crandn(rng, M)
        lam, mu = 10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-2, 0)
        Z = update_z(Y, gamma, Zp, lam, mu, check=False)
        D = np.diag(1 + gamma)
        lhs = (D.conj().T @ D + lam * hermitian_inv_sqrt(Zp, mu)) @ Z
        rhs = D.conj().T @ Y
        worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    record("C2 Z-update normal equation", worst <= 1e-8, f"max relative residual {worst:.2e} (<= 1e-8)")


def test_c3_box_lasso_oracles():
    rng = np.random.default_rng(303)
    worst_gap = worst_kkt = 0.0
    for k in range(50):
        M, T = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        bound = float(rng.choice([0.25, 1.0, 3.0]))
        lam = float(rng.choice([0.05, 0.2, 1.0]))
        Y, Z = random_instance(rng, M, T, scale=2.0)
        p = box_lasso.build_subproblem(Y, Z, lam, bound)
        sol = box_lasso.solve(p, tol=1e-8)
        Phi_bar, g_bar = dense_parts(Y, Z)
        f = dense_objective(Phi_bar, g_bar, lam, sol.gamma_bar)
        worst_gap = max(worst_gap, abs(f - grid_minimum(Phi_bar, g_bar, lam, bound)))
        worst_kkt = max(worst_kkt, box_lasso.kkt_residual(p, sol.gamma_bar))

    # an x error is about the KKT residual over the Gram diagonal, so agreement
    # to 1e-10 needs a tighter stop than the default 1e-8
    worst_closed = 0.0
    cases = [(0.5, 0.3), (-0.5, -0.3), (15.0, 10.0), (-15.0, -10.0), (0.1, 0.0), (0.0, 0.0)]
    for g, expected in cases:
        p = box_lasso.problem_from_dense(np.eye(2), np.array([g, -g]), 0.2, 10.0)
        x = box_lasso.solve(p, tol=1e-12).gamma_bar
        worst_closed = max(worst_closed, np.max(np.abs(x - [expected, -expected])))
    for _ in range(20):
        q = rng.uniform(0.1, 5, 6)
        c = rng.normal(0, 3, 6)
        p = box_lasso.problem_from_dense(np.diag(np.sqrt(q)), c / np.sqrt(q), 0.2, 1.5)
        exact = np.clip(np.sign(c) * np.maximum(np.abs(c) - 0.2, 0) / q, -1.5, 1.5)
        x = box_lasso.solve(p, tol=1e-12).gamma_bar
        worst_closed = max(worst_closed, np.max(np.abs(x - exact)))
    ok = worst_gap <= 1e-3 and worst_kkt <= 1e-8 and worst_closed <= 1e-10
    record("C3 box-lasso oracle equivalence", ok,
           f"grid gap {worst_gap:.2e} (<= 1e-3), KKT {worst_kkt:.2e} (<= 1e-8), "
           f"closed form {worst_closed:.2e} (<= 1e-10, solved at tol 1e-12)")


def test_c4_monotone_objective_fixed_mu():
    params = SolverParams(alpha=1.0)
    worst = -math.inf
    for s in range(20):
        Y = generate_scenario(DESK.replace(seed=4000 + s)).measurements
        res = run(Y, params)
        f = [objective(Y, Y, np.zeros(8), params.lambda1, params.lambda2, params.mu0)]
        f += [r.objective for r in res.trace]
        worst = max(worst, float(np.max(np.diff(f))))
    record("C4 monotone objective (alpha = 1)", worst <= 1e-8,
           f"largest increase {worst:.2e} over 20 problems (<= 1e-8)")


@pytest.mark.slow
def test_c5_noiseless_end_to_end():
    cfg = DESK.replace(snr_db=math.inf)
    hits, slowest, details = 0, 0.0, []
    for q in range(20):
        t0 = time.perf_counter()
        o = run_trial(cfg, SolverParams(), q)
        slowest = max(slowest, time.perf_counter() - t0)
        good = o.detection_correct and max(o.doa_abs_errors_deg) <= 0.05
        hits += good
        details.append(f"{max(o.doa_abs_errors_deg):.2f}{'' if o.detection_correct else '*'}")
    record("C5 noiseless end-to-end", hits >= 19 and slowest <= 2.0,
           f"{hits}/20 trials exact (>= 19), slowest {slowest:.2f} s (<= 2 s); "
           f"max errors deg (* = wrong set): {' '.join(details)}")


@pytest.fixture(scope="module")
def desk_sweeps():
    t0 = time.perf_counter()
    snr = sweep(DESK, SolverParams(), "snr_db", [-10.0, 0.0, 10.0], 100)
    snap = sweep(DESK.replace(snr_db=0.0), SolverParams(), "snapshots", [50, 100, 200], 100)
    return snr, snap, time.perf_counter() - t0


@pytest.mark.slow
def test_c6a_resprob_at_10db(desk_sweeps):
    r = desk_sweeps[0][2]
    record("C6a ResProb at 10 dB", r.res_prob >= 0.9, f"{r.res_prob:.2f} (>= 0.9)")


@pytest.mark.slow
def test_c6b_detrate_at_10db(desk_sweeps):
    r = desk_sweeps[0][2]
    record("C6b DetRate at 10 dB", r.det_rate >= 0.7, f"{r.det_rate:.2f} (>= 0.7)")


@pytest.mark.slow
def test_c6c_rmse_decreases_with_snr(desk_sweeps):
    rmse = [r.rmse_deg for r in desk_sweeps[0]]
    ok = rmse[0] > rmse[1] > rmse[2]
    record("C6c RMSE strictly decreasing over SNR -10/0/10 dB", ok,
           " > ".join(f"{v:.3f}" for v in rmse))


@pytest.mark.slow
def test_c6d_resprob_grows_with_snapshots(desk_sweeps):
    rp = [r.res_prob for r in desk_sweeps[1]]
    ok = rp[0] <= rp[1] <= rp[2]
    record("C6d ResProb non-decreasing over T 50/100/200 at 0 dB", ok,
           " <= ".join(f"{v:.2f}" for v in rp))


@pytest.mark.slow
def test_c6e_sweep_runtime(desk_sweeps):
    elapsed = desk_sweeps[2]
    record("C6e desk sweep runtime", elapsed <= 600.0, f"{elapsed:.1f} s for 600 trials (<= 600 s)")


def test_c7_detector_suite():
    hand = detect(np.array([0.01, 0.02, 0.03, 0.04, 0.05, 2.0, 2.1, 2.2]))
    zero = detect(np.zeros(8))
    rng = np.random.default_rng(707)
    perm_ok = True
    for _ in range(200):
        M = int(rng.integers(3, 17))
        g = crandn(rng, M) * rng.choice([0.01, 1.0, 5.0], M)
        perm = rng.permutation(M)
        a, b = detect(g), detect(g[perm])
        perm_ok &= a.num_distorted == b.num_distorted
        perm_ok &= np.array_equal(np.sort(perm[b.distorted_indices]), a.distorted_indices)
    ok = hand.num_distorted == 3 and zero.num_distorted == 0 and perm_ok
    record("C7 detector suite", ok,
           f"hand trace M_fail={hand.num_distorted} (3), all-zero M_fail={zero.num_distorted} (0), "
           f"permutation invariance {'exact' if perm_ok else 'violated'}")


def test_c8_csv_independent_of_workers():
    cfg = DESK.replace(seed=88)
    params = SolverParams(k_max=30)
    texts = []
    for n_jobs in (1, 2, 3):
        fh = io.StringIO()
        write_reports_csv(sweep(cfg, params, "snr_db", [0.0, 10.0], 6, n_jobs=n_jobs), fh)
        texts.append(fh.getvalue())
    ok = texts[0] == texts[1] == texts[2]
    record("C8 CSV bit-identical for 1, 2, 3 workers", ok,
           "identical" if ok else "outputs differ")
