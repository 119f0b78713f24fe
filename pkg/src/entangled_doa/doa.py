"""MUSIC direction finding on the recovered low-rank component."""

import csv
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_matrix
from .array import steering_matrix
from .numerics import svd

DEFAULT_GRID_STEP = 0.05


def default_grid(step=DEFAULT_GRID_STEP):
    """Uniform angles strictly inside (-90, 90) with the given step, symmetric about 0."""
    if not step > 0:
        raise DomainError("grid step must be positive")
    n = int(np.floor((90.0 - 1e-9) / step))
    return np.round(step * np.arange(-n, n + 1), 10)


@dataclass
class SpectrumGrid:
    angles_deg: np.ndarray
    values: np.ndarray

    @property
    def step(self):
        return float(self.angles_deg[1] - self.angles_deg[0]) if self.angles_deg.size > 1 else 0.0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["angle_deg", "value"])
            for a, v in zip(self.angles_deg, self.values):
                writer.writerow([repr(float(a)), repr(float(v))])


@dataclass
class DoaEstimate:
    doas_deg: np.ndarray
    spectrum: SpectrumGrid
    degenerate: bool = False


def music_spectrum(Z_hat, K, grid=None, spacing_wavelengths=0.5):
    """MUSIC pseudo-spectrum ``1 / (a^H (I - L L^H) a)``.

    ``L`` holds the ``K`` leading left singular vectors of ``Z_hat``.
    """
    Z_hat = check_matrix(Z_hat, "Z_hat")
    M = Z_hat.shape[0]
    K = int(K)
    if not 0 < K < M:
        raise DomainError(f"need 0 < K < M, got K={K}, M={M}")
    angles = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if angles.ndim != 1 or angles.size == 0:
        raise DomainError("angle grid must be a non-empty 1-D sequence")
    if np.any(np.diff(angles) <= 0):
        raise DomainError("angle grid must be strictly increasing")
    L = svd(Z_hat)[0][:, :K]
    a = steering_matrix(angles, M, spacing_wavelengths)
    proj = L.conj().T @ a
    denom = np.sum(np.abs(a) ** 2, axis=0) - np.sum(np.abs(proj) ** 2, axis=0)
    denom = np.maximum(denom, 1e-300)
    return SpectrumGrid(angles, 1.0 / denom)


def local_maxima(values):
    """Indices of strict interior local maxima."""
    v = np.asarray(values)
    if v.size < 3:
        return np.array([], dtype=int)
    return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1


def estimate_doas(spectrum, K):
    """Angles of the ``K`` largest strict local maxima, sorted ascending.

    When fewer than ``K`` peaks exist the remainder is filled with the
    largest other grid values and ``degenerate`` is set.
    """
    K = int(K)
    if K < 1:
        raise DomainError("K must be at least 1")
    values = np.asarray(spectrum.values)
    if values.size == 0:
        raise DomainError("empty spectrum")
    if K > values.size:
        raise DomainError("K exceeds the number of grid points")
    peaks = local_maxima(values)
    # stable sort on -value keeps the lower angle first on ties
    order = peaks[np.argsort(-values[peaks], kind="stable")]
    chosen = list(order[:K])
    degenerate = len(chosen) < K
    if degenerate:
        rest = np.argsort(-values, kind="stable")
        taken = set(chosen)
        for i in rest:
            if len(chosen) == K:
                break
            if i not in taken:
                chosen.append(i)
                taken.add(i)
    chosen = np.sort(np.asarray(chosen, dtype=int))
    return DoaEstimate(spectrum.angles_deg[chosen], spectrum, degenerate)
