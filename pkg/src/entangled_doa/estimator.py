"""scikit-learn style front end.

Estimators follow the sklearn layout: ``X`` has one row per snapshot and one
column per sensor, i.e. ``X = Y.T``.  Complex input is accepted, which
``sklearn.utils.check_array`` does not allow, so validation goes through
:func:`check_snapshots`.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import DimensionError, check_matrix
from .decomposer import SolverParams, run_normalized
from .detector import detect
from .doa import default_grid, estimate_doas, music_spectrum


def check_snapshots(X, n_sensors=None):
    """Validate an (n_snapshots, n_sensors) complex array and return it."""
    X = check_matrix(X, "X")
    if n_sensors is not None and X.shape[1] != n_sensors:
        raise DimensionError(
            f"X has {X.shape[1]} sensors (columns) but the estimator was fitted with {n_sensors}"
        )
    return X


class EntangledDecomposition(TransformerMixin, BaseEstimator):
    """Split array snapshots into a low-rank signal part and per-sensor distortions.

    Parameters mirror :class:`~entangled_doa.decomposer.SolverParams`;
    ``normalize="snapshots"`` divides the data by ``sqrt(n_snapshots)`` before
    solving.

    Attributes
    ----------
    low_rank_ : ndarray, shape (n_snapshots, n_sensors)
        Recovered distortion-free component (transposed ``Z_hat``).
    gamma_ : ndarray, shape (n_sensors,)
        Estimated complex gain/phase errors.
    trace_ : list of IterationRecord
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, lambda1=2.0, lambda2=0.2, mu0=1.0, alpha=0.95, mu_min=1e-6,
                 gamma_max=10.0, epsilon=1e-12, k_max=100, inner_tol=1e-8,
                 inner_max_iter=2000, normalize="snapshots"):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.mu0 = mu0
        self.alpha = alpha
        self.mu_min = mu_min
        self.gamma_max = gamma_max
        self.epsilon = epsilon
        self.k_max = k_max
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter
        self.normalize = normalize

    def solver_params(self):
        return SolverParams(
            lambda1=self.lambda1, lambda2=self.lambda2, mu0=self.mu0, alpha=self.alpha,
            mu_min=self.mu_min, gamma_max=self.gamma_max, epsilon=self.epsilon,
            k_max=self.k_max, inner_tol=self.inner_tol, inner_max_iter=self.inner_max_iter,
        )

    def fit(self, X, y=None):
        X = check_snapshots(X)
        res = run_normalized(X.T, self.solver_params(), normalize=self.normalize)
        self.low_rank_ = res.Z_hat.T
        self.gamma_ = res.gamma_hat
        self.trace_ = res.trace
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Undo the estimated distortions: row ``t`` becomes ``x_t / (1 + gamma)``."""
        check_is_fitted(self, "gamma_")
        X = check_snapshots(X, self.n_features_in_)
        d = 1.0 + self.gamma_
        # a response of exactly zero cannot be inverted; leave that channel as is
        d = np.where(d == 0, 1.0, d)
        return X / d[None, :]


class DistortedArrayDOA(BaseEstimator):
    """Joint DOA estimation and distorted-sensor detection.

    Parameters
    ----------
    n_sources : int
        Number of impinging signals (assumed known).
    decomposer : EntangledDecomposition, optional
        Cloned on fit; nested parameters are reachable as ``decomposer__<name>``.
    grid_step : float
        MUSIC grid spacing in degrees.
    spacing_wavelengths : float
    h_factor : float
        Multiplier of the reference gap in the detector.

    Attributes
    ----------
    doas_ : ndarray, shape (n_sources,)
    spectrum_ : SpectrumGrid
    degenerate_ : bool
        True when fewer than ``n_sources`` spectral peaks were found.
    detection_ : DetectionReport
    distorted_sensors_ : ndarray of int
    decomposer_ : EntangledDecomposition
    """

    def __init__(self, n_sources=2, decomposer=None, grid_step=0.05,
                 spacing_wavelengths=0.5, h_factor=10.0):
        self.n_sources = n_sources
        self.decomposer = decomposer
        self.grid_step = grid_step
        self.spacing_wavelengths = spacing_wavelengths
        self.h_factor = h_factor

    def fit(self, X, y=None):
        X = check_snapshots(X)
        base = self.decomposer if self.decomposer is not None else EntangledDecomposition()
        self.decomposer_ = clone(base).fit(X)
        Z_hat = self.decomposer_.low_rank_.T
        self.spectrum_ = music_spectrum(Z_hat, self.n_sources, default_grid(self.grid_step),
                                        self.spacing_wavelengths)
        est = estimate_doas(self.spectrum_, self.n_sources)
        self.doas_ = est.doas_deg
        self.degenerate_ = est.degenerate
        self.detection_ = detect(self.decomposer_.gamma_, self.h_factor)
        self.distorted_sensors_ = self.detection_.distorted_indices
        self.n_features_in_ = X.shape[1]
        return self

    def fit_predict(self, X, y=None):
        """Fit and return the estimated directions in degrees."""
        return self.fit(X).doas_
