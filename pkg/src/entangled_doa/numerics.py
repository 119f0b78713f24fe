"""Dense complex kernels used by the decomposition solver.

The Khatri-Rao selector ``Phi = Z^T (kr) I`` maps a per-sensor gain vector
``gamma`` to ``vec(diag(gamma) Z)``.  It is applied matrix-free; the dense
constructor is kept for cross-checking only.
"""

import numpy as np

from ._validation import DimensionError, check_matrix, check_positive, check_vector

EIG_FLOOR = 1e-14


def hermitian_inv_sqrt(Z, mu):
    """Return ``(Z Z^H + mu^2 I)^(-1/2)`` via a Hermitian eigendecomposition.

    Parameters
    ----------
    Z : array_like, shape (M, T)
    mu : float
        Smoothing parameter, must be positive.

    Returns
    -------
    P : ndarray, shape (M, M)
        Hermitian positive-definite inverse square root.
    """
    Z = check_matrix(Z, "Z")
    mu = check_positive(mu, "mu")
    G = Z @ Z.conj().T
    G = 0.5 * (G + G.conj().T)
    G[np.diag_indices_from(G)] += mu * mu
    w, V = np.linalg.eigh(G)
    # eigenvalues are >= mu^2 in exact arithmetic; floor guards round-off only
    w = np.maximum(w, EIG_FLOOR * max(w[-1], 0.0) + np.finfo(float).tiny)
    P = (V * (1.0 / np.sqrt(w))) @ V.conj().T
    return 0.5 * (P + P.conj().T)


def svd(Zhat):
    """Full SVD ``Zhat = L diag(sigma) R^H`` with descending singular values.

    Returns ``(L, sigma, R)`` where ``L`` is M x M and ``R`` is T x T (note: ``R``,
    not ``R^H``).
    """
    Zhat = check_matrix(Zhat, "Zhat")
    L, sigma, Rh = np.linalg.svd(Zhat, full_matrices=True)
    return L, sigma, Rh.conj().T


class KhatriRaoSelector:
    """Matrix-free form of ``Phi = Z^T (kr) I`` for a fixed M x T matrix ``Z``.

    Column ``m`` of the implied MT x M matrix is nonzero only at rows
    ``t*M + m`` (0-based), where it holds ``Z[m, t]``.
    """

    def __init__(self, Z):
        self.source = check_matrix(Z, "Z")

    @property
    def shape(self):
        M, T = self.source.shape
        return (M * T, M)

    def apply(self, gamma):
        """``Phi @ gamma`` = ``vec(diag(gamma) Z)`` (column-major vec)."""
        M, _ = self.source.shape
        gamma = check_vector(gamma, M, "gamma")
        return (gamma[:, None] * self.source).ravel(order="F")

    def adjoint_apply(self, r):
        """``Phi^H @ r``; entry m is ``sum_t conj(Z[m, t]) r[t*M + m]``."""
        M, T = self.source.shape
        r = check_vector(r, M * T, "r")
        R = r.reshape((M, T), order="F")
        return np.sum(self.source.conj() * R, axis=1)

    def gram_diagonal(self):
        """``Phi^H Phi`` is diagonal with the squared row norms of ``Z``."""
        return np.sum(np.abs(self.source) ** 2, axis=1)

    def to_dense(self):
        return khatri_rao(self.source.T, np.eye(self.source.shape[0]))


def khatri_rao(B, A):
    """Column-wise Kronecker product ``B (kr) A``, built densely.

    Intended for small oracle checks; the solver never calls it.
    """
    B = np.asarray(B)
    A = np.asarray(A)
    if B.shape[1] != A.shape[1]:
        raise DimensionError(
            f"Khatri-Rao factors need equal column counts, got {B.shape[1]} and {A.shape[1]}"
        )
    return np.einsum("ik,jk->ijk", B, A).reshape(B.shape[0] * A.shape[0], B.shape[1])
