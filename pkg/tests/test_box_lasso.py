import numpy as np
import pytest
from scipy.optimize import minimize

from entangled_doa import box_lasso
from entangled_doa._validation import DimensionError, InvalidInputError
from entangled_doa.box_lasso import (
    build_subproblem,
    kkt_residual,
    problem_from_dense,
    real_split_dense,
    solve,
)

from conftest import crandn
from test_numerics import dense_selector_loop


def dense_parts(Y, Z):
    g = (Y - Z).ravel(order="F")
    Phi_bar = real_split_dense(dense_selector_loop(Z))
    return Phi_bar, np.concatenate([g.real, g.imag])


def dense_objective(Phi_bar, g_bar, lam, x):
    return 0.5 * np.sum((g_bar - Phi_bar @ x) ** 2) + lam * np.sum(np.abs(x))


def grid_minimum(Phi_bar, g_bar, lam, bound, resolution=1e-3):
    """Minimum over the product grid, computed coordinatewise.

    Valid only for a diagonal Gram, which is asserted first.
    """
    Q = Phi_bar.T @ Phi_bar
    off = Q - np.diag(np.diag(Q))
    assert np.max(np.abs(off)) <= 1e-12 * max(1.0, np.max(np.abs(Q)))
    c = Phi_bar.T @ g_bar
    grid = np.linspace(-bound, bound, int(round(2 * bound / resolution)) + 1)
    best = 0.0
    for q, ci in zip(np.diag(Q), c):
        best += np.min(0.5 * q * grid**2 - ci * grid + lam * np.abs(grid))
    return best + 0.5 * g_bar @ g_bar


def qp_split_minimum(Phi_bar, g_bar, lam, bound):
    """Bound-constrained QP in the positive/negative split variables."""
    n = Phi_bar.shape[1]

    def fun(w):
        x = w[:n] - w[n:]
        r = Phi_bar @ x - g_bar
        gx = Phi_bar.T @ r
        return 0.5 * r @ r + lam * w.sum(), np.concatenate([gx + lam, -gx + lam])

    res = minimize(fun, np.zeros(2 * n), jac=True, method="L-BFGS-B",
                   bounds=[(0.0, bound)] * (2 * n),
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return res.fun


def random_instance(rng, M, T, scale=1.0):
    Z = crandn(rng, M, T)
    gamma = np.zeros(M, dtype=complex)
    gamma[rng.integers(M)] = scale * crandn(rng, 1)[0]
    Y = (1 + gamma)[:, None] * Z + 0.1 * crandn(rng, M, T)
    return Y, Z


class TestBuildSubproblem:
    def test_equal_inputs_give_zero_data(self, rng):
        Z = crandn(rng, 3, 4)
        p = build_subproblem(Z, Z, 0.2, 10)
        assert np.all(p.g_bar == 0) and np.all(p.correlation == 0)

    def test_scalar(self):
        p = build_subproblem([[2.0]], [[1.0]], 0.2, 10)
        np.testing.assert_array_equal(p.g_bar, [1.0, 0.0])
        np.testing.assert_array_equal(p.operator @ np.eye(2), np.eye(2))

    def test_operator_matches_dense(self, rng):
        Y, Z = crandn(rng, 3, 4), crandn(rng, 3, 4)
        p = build_subproblem(Y, Z, 0.2, 10)
        Phi_bar, g_bar = dense_parts(Y, Z)
        np.testing.assert_array_equal(p.g_bar, g_bar)
        for _ in range(20):
            x = rng.standard_normal(6)
            r = rng.standard_normal(24)
            np.testing.assert_allclose(p.operator.matvec(x), Phi_bar @ x, atol=1e-12)
            np.testing.assert_allclose(p.operator.rmatvec(r), Phi_bar.T @ r, atol=1e-12)
        np.testing.assert_allclose(p.gram, Phi_bar.T @ Phi_bar, atol=1e-12)
        np.testing.assert_allclose(p.correlation, Phi_bar.T @ g_bar, atol=1e-12)

    def test_block_identity(self, rng):
        Z = crandn(rng, 3, 5)
        p = build_subproblem(Z, Z, 0.2, 10)
        g = crandn(rng, 3)
        v = (g[:, None] * Z).ravel(order="F")
        np.testing.assert_allclose(
            p.operator.matvec(np.concatenate([g.real, g.imag])),
            np.concatenate([v.real, v.imag]),
            atol=1e-13,
        )

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            build_subproblem(np.ones((2, 3)), np.ones((3, 2)), 0.2, 1)


class TestSolveClosedForm:
    def test_soft_threshold(self):
        p = problem_from_dense(np.eye(4), np.full(4, 0.5), 0.2, 10.0)
        sol = solve(p)
        np.testing.assert_allclose(sol.gamma_bar, 0.3, atol=1e-10)

    def test_clipped(self):
        p = problem_from_dense(np.eye(2), np.array([15.0, -15.0]), 0.2, 10.0)
        sol = solve(p)
        np.testing.assert_allclose(sol.gamma_bar, [10.0, -10.0], atol=1e-10)

    def test_zero_data(self):
        p = problem_from_dense(np.eye(3), np.zeros(3), 0.2, 10.0)
        assert np.all(solve(p).gamma_bar == 0)

    def test_large_lambda_gives_exact_zero(self, rng):
        Y, Z = random_instance(rng, 3, 4)
        p = build_subproblem(Y, Z, 1.0, 10.0)
        lam = np.max(np.abs(p.correlation))
        p = build_subproblem(Y, Z, lam, 10.0)
        assert np.all(solve(p).gamma_bar == 0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_separable_solution(self, seed):
        rng = np.random.default_rng(seed)
        Y, Z = random_instance(rng, 5, 7, scale=3.0)
        bound = 1.5
        p = build_subproblem(Y, Z, 0.2, bound)
        q = np.diag(p.gram)
        c = p.correlation
        exact = np.clip(np.sign(c) * np.maximum(np.abs(c) - 0.2, 0) / q, -bound, bound)
        sol = solve(p, tol=1e-10)
        assert sol.converged
        np.testing.assert_allclose(sol.gamma_bar, exact, atol=1e-10)


class TestSolveOracles:
    @pytest.mark.parametrize("seed", range(15))
    def test_grid_and_qp(self, seed):
        rng = np.random.default_rng(100 + seed)
        M, T = rng.integers(1, 4), rng.integers(1, 4)
        bound = [0.3, 1.0, 2.0][seed % 3]
        Y, Z = random_instance(rng, M, T, scale=2.0)
        p = build_subproblem(Y, Z, 0.2, bound)
        sol = solve(p)
        Phi_bar, g_bar = dense_parts(Y, Z)
        f = dense_objective(Phi_bar, g_bar, 0.2, sol.gamma_bar)
        assert abs(f - grid_minimum(Phi_bar, g_bar, 0.2, bound)) <= 1e-3
        assert f <= qp_split_minimum(Phi_bar, g_bar, 0.2, bound) + 1e-8
        assert sol.kkt_residual <= 1e-8

    def test_general_dense_operator(self, rng):
        # non-diagonal Gram: compare against the QP split only
        A = rng.standard_normal((12, 4))
        b = rng.standard_normal(12) * 3
        p = problem_from_dense(A, b, 0.5, 0.8)
        sol = solve(p)
        assert sol.converged
        assert abs(dense_objective(A, b, 0.5, sol.gamma_bar) - qp_split_minimum(A, b, 0.5, 0.8)) <= 1e-8


class TestInvariants:
    @pytest.mark.parametrize("seed", range(5))
    def test_feasible_and_kkt(self, seed):
        rng = np.random.default_rng(seed)
        Y, Z = random_instance(rng, 6, 10, scale=5.0)
        p = build_subproblem(Y, Z, 0.2, 1.0)
        sol = solve(p)
        assert np.all(np.abs(sol.gamma.real) <= 1.0 + 1e-9)
        assert np.all(np.abs(sol.gamma.imag) <= 1.0 + 1e-9)
        assert sol.converged and kkt_residual(p, sol.gamma_bar) <= 1e-8

    def test_not_worse_than_warm_start(self, rng):
        Y, Z = random_instance(rng, 4, 6)
        p = build_subproblem(Y, Z, 0.2, 2.0)
        w = 0.5 * crandn(rng, 4)
        f0 = p.objective(np.concatenate([w.real, w.imag]))
        sol = solve(p, warm_start=w)
        assert sol.objective <= f0

    def test_monotone_iterates(self):
        # anisotropic diagonal Gram so APG needs many steps
        rng = np.random.default_rng(7)
        Z = crandn(rng, 6, 8) * np.array([0.3, 1, 2, 4, 6, 8])[:, None]
        Y = Z + crandn(rng, 6, 8)
        p = build_subproblem(Y, Z, 0.2, 10.0)
        values = [solve(p, max_iter=k).objective for k in range(0, 60)]
        assert np.all(np.diff(values) <= 1e-12 * max(1.0, abs(values[0])))

    def test_iteration_cap_flags_nonconvergence(self):
        rng = np.random.default_rng(7)
        Z = crandn(rng, 6, 8) * np.array([0.3, 1, 2, 4, 6, 8])[:, None]
        p = build_subproblem(Z + crandn(rng, 6, 8), Z, 0.2, 10.0)
        sol = solve(p, max_iter=2)
        assert not sol.converged and sol.iterations == 2

    def test_tie_at_lambda_stays_zero(self):
        p = problem_from_dense(np.eye(1), np.array([0.2]), 0.2, 10.0)
        assert solve(p).gamma_bar[0] == 0.0

    def test_nonfinite(self):
        p = problem_from_dense(np.eye(2), np.ones(2), 0.2, 1.0)
        p.correlation[0] = np.nan
        with pytest.raises(InvalidInputError):
            solve(p)

    def test_lipschitz_estimate(self, rng):
        A = rng.standard_normal((10, 5))
        G = A.T @ A
        L = box_lasso.lipschitz_estimate(G)
        top = np.linalg.eigvalsh(G)[-1]
        assert 0.9 * top <= L <= 1.05 * top + 1e-12
