"""Box-constrained LASSO for the per-sensor distortion vector.

With ``Z`` fixed the distortion update solves::

    min_x  1/2 ||g_bar - Phi_bar x||^2 + lambda2 ||x||_1
    s.t.   -gamma_max <= x_i <= gamma_max

where ``x = [Re gamma; Im gamma]``, ``g = vec(Y - Z)``,
``Phi = Z^T (kr) I`` and the bar denotes the real block form
``[[Re Phi, -Im Phi], [Im Phi, Re Phi]]``.  Splitting ``x = x+ - x-`` turns
this into a bound-constrained QP; here it is solved directly with
accelerated proximal gradient, whose proximal map is the clipped soft
threshold ``clip(soft(v, lambda2/L), +-gamma_max)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ._validation import (
    DimensionError,
    InvalidInputError,
    check_matrix,
    check_positive,
    check_vector,
)
from .numerics import KhatriRaoSelector


def real_split_operator(selector):
    """Real block form of a :class:`KhatriRaoSelector` as a ``LinearOperator``."""
    n, M = selector.shape

    def matvec(x):
        x = np.ravel(x)
        v = selector.apply(x[:M] + 1j * x[M:])
        return np.concatenate([v.real, v.imag])

    def rmatvec(r):
        r = np.ravel(r)
        u = selector.adjoint_apply(r[:n] + 1j * r[n:])
        return np.concatenate([u.real, u.imag])

    return LinearOperator((2 * n, 2 * M), matvec=matvec, rmatvec=rmatvec, dtype=float)


def real_split_dense(Phi):
    """Dense ``[[Re Phi, -Im Phi], [Im Phi, Re Phi]]``."""
    Phi = np.asarray(Phi, dtype=complex)
    return np.block([[Phi.real, -Phi.imag], [Phi.imag, Phi.real]])


@dataclass
class RealSplitProblem:
    """Real-valued LASSO data.  ``gram`` and ``correlation`` are
    ``Phi_bar^T Phi_bar`` and ``Phi_bar^T g_bar``; the solver only touches these.
    """

    g_bar: np.ndarray
    operator: LinearOperator
    lambda2: float
    gamma_max: float
    gram: np.ndarray
    correlation: np.ndarray

    @property
    def size(self):
        return self.gram.shape[0]

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        quad = 0.5 * x @ (self.gram @ x) - self.correlation @ x + 0.5 * self.g_bar @ self.g_bar
        return max(quad, 0.0) + self.lambda2 * np.sum(np.abs(x))

    def gradient(self, x):
        return self.gram @ x - self.correlation


def build_subproblem(Y, Z, lambda2, gamma_max):
    """Assemble the real-split problem for fixed ``Z``."""
    Y = check_matrix(Y, "Y")
    Z = check_matrix(Z, "Z")
    if Y.shape != Z.shape:
        raise DimensionError(f"Y {Y.shape} and Z {Z.shape} differ in shape")
    lambda2 = check_positive(lambda2, "lambda2")
    gamma_max = check_positive(gamma_max, "gamma_max")

    sel = KhatriRaoSelector(Z)
    g = (Y - Z).ravel(order="F")
    g_bar = np.concatenate([g.real, g.imag])
    c = sel.adjoint_apply(g)
    d = sel.gram_diagonal()
    gram = np.diag(np.concatenate([d, d]))
    return RealSplitProblem(
        g_bar=g_bar,
        operator=real_split_operator(sel),
        lambda2=lambda2,
        gamma_max=gamma_max,
        gram=gram,
        correlation=np.concatenate([c.real, c.imag]),
    )


def problem_from_dense(Phi_bar, g_bar, lambda2, gamma_max):
    """Problem with an explicit real matrix, for small checks."""
    Phi_bar = check_matrix(Phi_bar, "Phi_bar", dtype=float)
    g_bar = check_vector(g_bar, Phi_bar.shape[0], "g_bar", dtype=float)
    return RealSplitProblem(
        g_bar=g_bar,
        operator=aslinearoperator(Phi_bar),
        lambda2=check_positive(lambda2, "lambda2"),
        gamma_max=check_positive(gamma_max, "gamma_max"),
        gram=Phi_bar.T @ Phi_bar,
        correlation=Phi_bar.T @ g_bar,
    )


@dataclass
class BoxLassoSolution:
    gamma: np.ndarray
    gamma_bar: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    objective: float


def clipped_soft_threshold(v, threshold, bound):
    return np.clip(np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0), -bound, bound)


def kkt_residual(problem, x):
    """Largest per-coordinate violation of the optimality conditions.

    With ``r`` the gradient of the smooth part: free nonzero coordinates need
    ``r_i + lambda2 sign(x_i) = 0``; zeros need ``|r_i| <= lambda2``; a
    coordinate at ``+gamma_max`` needs ``r_i <= -lambda2`` (and symmetrically
    at ``-gamma_max``).
    """
    x = np.asarray(x, dtype=float)
    return _kkt(x, problem.gradient(x), problem.lambda2, problem.gamma_max)


def _kkt(x, r, lam, bound):
    if x.size == 0:
        return 0.0
    sgn = np.sign(x)
    free = np.abs(r + lam * sgn)
    at_zero = np.maximum(np.abs(r) - lam, 0.0)
    # at +bound: r + lam <= 0 ; at -bound: r - lam >= 0
    at_bound = np.maximum(sgn * r + lam, 0.0)
    res = np.where(x == 0, at_zero, np.where(np.abs(x) >= bound, at_bound, free))
    return float(res.max())


def lipschitz_estimate(gram, n_iter=20, safety=1.05):
    """Power-iteration estimate of the largest eigenvalue of ``gram``."""
    v = np.ones(gram.shape[0]) / np.sqrt(gram.shape[0])
    lam = 0.0
    for _ in range(n_iter):
        w = gram @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        lam = v @ w
        v = w / nrm
    lam = max(lam, v @ (gram @ v))
    return safety * lam


def solve(problem, tol=1e-8, max_iter=2000, warm_start=None):
    """Accelerated proximal gradient with restart on objective increase.

    Iterates are kept monotone: a step that raises the objective is rejected
    and momentum is reset.  Hitting ``max_iter`` is not an error; the best
    iterate is returned with ``converged=False``.

    Parameters
    ----------
    problem : RealSplitProblem
    tol : float
        Target for :func:`kkt_residual`.
    max_iter : int
    warm_start : complex array of length M, optional
        Projected onto the box before use.
    """
    tol = check_positive(tol, "tol")
    if not (np.all(np.isfinite(problem.gram)) and np.all(np.isfinite(problem.correlation))):
        raise InvalidInputError("subproblem data contain non-finite entries")
    n = problem.size
    M = n // 2
    lam, bound = problem.lambda2, problem.gamma_max

    if warm_start is None:
        x = np.zeros(n)
    else:
        w = check_vector(warm_start, M, "warm_start")
        x = np.clip(np.concatenate([w.real, w.imag]), -bound, bound)

    Q, c = problem.gram, problem.correlation
    const = 0.5 * (problem.g_bar @ problem.g_bar)

    def value(x, Qx):
        return max(0.5 * (x @ Qx) - c @ x + const, 0.0) + lam * np.abs(x).sum()

    L = lipschitz_estimate(Q)
    if L == 0.0:
        L = 1.0
    L_cap = 1e12 * L
    Qx = Q @ x
    f = value(x, Qx)
    kkt = _kkt(x, Qx - c, lam, bound)
    # y and Q y are tracked together; Q y follows from linearity
    y, Qy, t = x, Qx, 1.0
    momentum = False
    converged = False
    it = 0
    while it < max_iter:
        if kkt <= tol:
            converged = True
            break
        it += 1
        v = y - (Qy - c) / L
        x_new = np.clip(np.sign(v) * np.maximum(np.abs(v) - lam / L, 0.0), -bound, bound)
        Qx_new = Q @ x_new
        # objective change formed from the step itself, free of the
        # cancellation in f_new - f when f is large
        d = x_new - x
        change = np.sum(d * (0.5 * (Qx_new + Qx) - c) + lam * (np.abs(x_new) - np.abs(x)))
        if change > 0.0:
            if momentum:
                y, Qy, t, momentum = x, Qx, 1.0, False
                continue
            if L >= L_cap:
                break
            L *= 2.0
            continue
        f_new = value(x_new, Qx_new)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        y = x_new + beta * (x_new - x)
        Qy = Qx_new + beta * (Qx_new - Qx)
        momentum = True
        x, Qx, f, t = x_new, Qx_new, f_new, t_new
        kkt = _kkt(x, Qx - c, lam, bound)

    return BoxLassoSolution(
        gamma=x[:M] + 1j * x[M:],
        gamma_bar=x,
        kkt_residual=kkt,
        iterations=it,
        converged=converged,
        objective=f,
    )
