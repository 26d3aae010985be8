"""Spectral linear algebra shared by the solvers and the diagnostics.

Every kernel matrix is factored exactly once, by a symmetric
eigendecomposition, so all modules agree on ranks and range bases.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateKernelError, ValidationError

RELATIVE_RANK_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SpectralCache:
    """Eigen-factorization of a PSD matrix restricted to its numerical range.

    Attributes
    ----------
    kernel_id : str
    eigenvalues : ndarray, shape (r,)
        Retained eigenvalues, nonincreasing, all above ``rank_tol``.
    range_basis : ndarray, shape (N, r)
        Orthonormal eigenvectors matching ``eigenvalues``.
    rank_tol : float
    """

    kernel_id: str
    eigenvalues: np.ndarray
    range_basis: np.ndarray
    rank_tol: float

    @property
    def rank(self):
        return self.eigenvalues.shape[0]

    @property
    def n(self):
        return self.range_basis.shape[0]

    def factor(self):
        """Return ``M`` with ``M @ M.T == K`` on the range (``U diag(sqrt(lam))``)."""
        return self.range_basis * np.sqrt(self.eigenvalues)


def check_symmetric(K, tol=SYMMETRY_TOL):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise ValidationError("matrix has non-finite entries")
    asym = np.max(np.abs(K - K.T)) if K.size else 0.0
    scale = max(1.0, float(np.max(np.abs(K)))) if K.size else 1.0
    if asym > tol * scale:
        raise ValidationError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return K


def spectral_cache(K, rank_tol=None, kernel_id=""):
    """Eigendecompose a symmetric PSD matrix and keep the eigenpairs above ``rank_tol``.

    The default threshold is ``1e-12 * lambda_max``; a looser cut breaks the
    exact per-step decrease identity of the greedy solver on kernels with
    smoothly decaying spectra.
    """
    K = check_symmetric(K)
    K = 0.5 * (K + K.T)
    w, V = np.linalg.eigh(K)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    top = float(w[0]) if w.size else 0.0
    if rank_tol is None:
        rank_tol = RELATIVE_RANK_TOL * max(top, 0.0)
    keep = w > rank_tol
    if top <= 0.0:
        keep[:] = False
    basis = np.ascontiguousarray(V[:, keep])
    return SpectralCache(kernel_id, w[keep].copy(), basis, float(rank_tol))


def project_onto_range(cache, v):
    """Orthogonal projection ``U U^T v`` onto the range of the cached matrix."""
    v = np.asarray(v, dtype=float)
    if v.shape != (cache.n,):
        raise ValidationError(f"vector length {v.shape} does not match N={cache.n}")
    if cache.rank == 0:
        return np.zeros_like(v)
    U = cache.range_basis
    return U @ (U.T @ v)


def min_positive_eigenvalue(cache, scale=None):
    """Smallest retained eigenvalue of ``scale * K`` (``scale`` defaults to 1/N)."""
    if cache.rank == 0:
        raise DegenerateKernelError(f"kernel {cache.kernel_id!r} has rank 0")
    if scale is None:
        scale = 1.0 / cache.n
    return float(cache.eigenvalues[-1] * scale)


def roundoff_floor(n):
    # cosines below this are indistinguishable from zero after two eigh calls
    return 64.0 * n * np.finfo(float).eps


def subspace_correlation(cache_i, cache_j):
    """Largest cosine of the principal angles between the two ranges.

    For ``a_i``, ``a_j`` ranging over R^N, ``K_i a_i / ||K_i a_i||`` covers
    exactly the unit sphere of range(K_i), so

        max |<K_i a_i, K_j a_j>| / (||K_i a_i|| ||K_j a_j||)
            = max_{u in range(K_i), v in range(K_j), unit} |u^T v|
            = sigma_max(U_i^T U_j).

    The 1/N scaling of the matrices cancels. Values at round-off level are
    reported as exactly zero.
    """
    for c in (cache_i, cache_j):
        if c.rank == 0:
            raise DegenerateKernelError(f"kernel {c.kernel_id!r} has rank 0")
    if cache_i.n != cache_j.n:
        raise ValidationError("caches built on different sample sizes")
    C = cache_i.range_basis.T @ cache_j.range_basis
    s = float(np.linalg.norm(C, 2))
    if s <= roundoff_floor(cache_i.n):
        return 0.0
    return min(s, 1.0)


def orthonormal_union(bases, n, tol=None):
    """Orthonormal basis of the span of the columns of all ``bases``."""
    bases = [b for b in bases if b.shape[1] > 0]
    if not bases:
        return np.zeros((n, 0))
    B = np.hstack(bases)
    Q, s, _ = np.linalg.svd(B, full_matrices=False)
    if tol is None:
        tol = max(B.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0) * 10
    return Q[:, s > tol]
