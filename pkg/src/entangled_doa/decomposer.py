"""Alternating solver for the entangled low-rank plus sparse model.

Minimises, for a slowly shrinking smoothing parameter ``mu``::

    f(Z, gamma) = 1/2 ||Y - (I + diag(gamma)) Z||_F^2
                  + lambda1 ||[Z, mu I]||_*
                  + lambda2 (||Re gamma||_1 + ||Im gamma||_1)
    s.t. |Re gamma_m|, |Im gamma_m| <= gamma_max

Each outer iteration does a closed-form ``Z`` step,
``Z = (D^H D + lambda1 P)^-1 D^H Y`` with ``D = I + diag(gamma)`` and
``P = (Z Z^H + mu^2 I)^(-1/2)`` taken at the previous ``Z``, then a
box-constrained LASSO step for ``gamma``.  Cost per iteration is O(M^3 + M^2 T).
"""

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import box_lasso
from ._validation import (
    DimensionError,
    InvalidInputError,
    check_matrix,
    check_positive,
    check_vector,
)
from .numerics import hermitian_inv_sqrt


class NumericalError(RuntimeError):
    """Raised when a linear solve fails its residual check."""


@dataclass(frozen=True)
class SolverParams:
    lambda1: float = 2.0
    lambda2: float = 0.2
    mu0: float = 1.0
    alpha: float = 0.95
    mu_min: float = 1e-6
    gamma_max: float = 10.0
    epsilon: float = 1e-12
    k_max: int = 100
    inner_tol: float = 1e-8
    inner_max_iter: int = 2000

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "mu0", "mu_min", "gamma_max", "inner_tol"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        # alpha == 1 keeps mu fixed; used for monotonicity checks
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if self.k_max < 1 or self.inner_max_iter < 1:
            raise ValueError("iteration caps must be positive")

    def to_dict(self):
        d = asdict(self)
        if d["epsilon"] == math.inf:
            d["epsilon"] = "inf"
        return d


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    mu: float
    stop_ratio: float
    inner_iters: int


@dataclass
class DecompositionResult:
    Z_hat: np.ndarray
    gamma_hat: np.ndarray
    trace: list = field(default_factory=list)
    converged: bool = False
    mu_final: float = 0.0

    @property
    def n_iter(self):
        return len(self.trace)

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            write_trace(self.trace, fh)


TRACE_COLUMNS = ("iteration", "objective", "mu", "stop_ratio", "inner_iters")


def write_trace(trace, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        writer.writerow(
            [rec.iteration, repr(rec.objective), repr(rec.mu), repr(rec.stop_ratio), rec.inner_iters]
        )


def smoothed_nuclear_norm(Z, mu):
    """``||[Z, mu I]||_* = sum_i sqrt(sigma_i(Z)^2 + mu^2)`` over all M values."""
    # singular values of Z directly; squaring first would lose small ones
    s = np.linalg.svd(Z, compute_uv=False)
    missing = Z.shape[0] - s.size
    return float(np.sum(np.sqrt(s * s + mu * mu)) + missing * abs(mu))


def objective(Y, Z, gamma, lambda1, lambda2, mu):
    """Smoothed objective with the real/imaginary split l1 penalty."""
    Y = check_matrix(Y, "Y")
    Z = check_matrix(Z, "Z")
    if Y.shape != Z.shape:
        raise DimensionError(f"Y {Y.shape} and Z {Z.shape} differ in shape")
    gamma = check_vector(gamma, Y.shape[0], "gamma")
    if not (np.isfinite(lambda1) and np.isfinite(lambda2) and np.isfinite(mu)):
        raise InvalidInputError("regularisation weights must be finite")
    fit = 0.5 * np.linalg.norm(Y - (1.0 + gamma)[:, None] * Z) ** 2
    l1 = np.sum(np.abs(gamma.real)) + np.sum(np.abs(gamma.imag))
    return float(fit + lambda1 * smoothed_nuclear_norm(Z, mu) + lambda2 * l1)


def update_z(Y, gamma, Z_prev, lambda1, mu, check=True):
    """Closed-form ``Z`` step with ``P`` built from ``Z_prev``."""
    Y = check_matrix(Y, "Y")
    Z_prev = check_matrix(Z_prev, "Z_prev")
    gamma = check_vector(gamma, Y.shape[0], "gamma")
    if Z_prev.shape != Y.shape:
        raise DimensionError(f"Z_prev {Z_prev.shape} and Y {Y.shape} differ in shape")
    mu = check_positive(mu, "mu")
    d = 1.0 + gamma
    P = hermitian_inv_sqrt(Z_prev, mu)
    H = lambda1 * P
    H[np.diag_indices_from(H)] += np.abs(d) ** 2
    rhs = d.conj()[:, None] * Y
    Z = np.linalg.solve(H, rhs)
    if check:
        res = np.linalg.norm(H @ Z - rhs)
        if not np.isfinite(res) or res > 1e-8 * np.linalg.norm(rhs):
            raise NumericalError(f"Z update residual {res:.3e} exceeds tolerance")
    return Z


def run(Y, params=None, init=None):
    """Run the alternating solver on measurements ``Y``.

    Parameters
    ----------
    Y : array_like, shape (M, T)
    params : SolverParams, optional
    init : tuple (Z, gamma), optional
        Defaults to ``(Y, 0)``.

    Returns
    -------
    DecompositionResult
        ``trace`` holds one record per outer iteration with ``f`` evaluated at
        the ``mu`` used in that iteration.  The stopping ratio compares ``f`` at
        the new and previous iterates, both at that same ``mu``; ``mu`` is then
        annealed to ``max(alpha mu, mu_min)``.
    """
    params = params or SolverParams()
    Y = check_matrix(Y, "Y")
    M = Y.shape[0]
    if init is None:
        Z = Y.copy()
        gamma = np.zeros(M, dtype=complex)
    else:
        Z = check_matrix(init[0], "Z_init")
        gamma = check_vector(init[1], M, "gamma_init")
        if Z.shape != Y.shape:
            raise DimensionError("initial Z must match Y in shape")

    mu = params.mu0
    trace = []
    converged = False
    try:
        for k in range(1, params.k_max + 1):
            f_prev = objective(Y, Z, gamma, params.lambda1, params.lambda2, mu)
            Z = update_z(Y, gamma, Z, params.lambda1, mu)
            sub = box_lasso.build_subproblem(Y, Z, params.lambda2, params.gamma_max)
            sol = box_lasso.solve(
                sub, tol=params.inner_tol, max_iter=params.inner_max_iter, warm_start=gamma
            )
            gamma = sol.gamma
            f = objective(Y, Z, gamma, params.lambda1, params.lambda2, mu)
            # both ends of the ratio use the mu in force during iteration k
            ratio = 0.0 if abs(f) < 1e-300 else abs(f - f_prev) / abs(f)
            trace.append(IterationRecord(k, f, mu, ratio, sol.iterations))
            mu = max(params.alpha * mu, params.mu_min)
            if ratio <= params.epsilon:
                converged = True
                break
    except (NumericalError, InvalidInputError) as exc:
        # keep what was computed so callers can still report it
        exc.trace = trace
        raise
    return DecompositionResult(Z, gamma, trace, converged, mu)


def snapshot_scale(Y):
    """Per-snapshot normalisation factor ``sqrt(T)``."""
    return math.sqrt(np.asarray(Y).shape[1])


def run_normalized(Y, params=None, normalize="snapshots"):
    """Run on ``Y / s`` and map ``Z`` back; ``gamma`` is scale-free.

    ``normalize`` is ``"snapshots"`` (``s = sqrt(T)``) or ``"none"``.  The
    regularisation weights are not scale-invariant, so the fixed defaults
    are tuned to per-snapshot units.
    """
    Y = check_matrix(Y, "Y")
    if normalize == "none":
        s = 1.0
    elif normalize == "snapshots":
        s = snapshot_scale(Y)
    else:
        raise ValueError(f"unknown normalize mode {normalize!r}")
    res = run(Y / s, params)
    res.Z_hat = res.Z_hat * s
    return res
