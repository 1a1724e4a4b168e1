"""Gaussian kernel evaluation, bandwidth selection and Gram matrices.

The kernel is ``k(x, x') = exp(-||x - x'||^2 / sigma)``; note that ``sigma``
divides the *squared* distance directly (no factor of two).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError


@dataclass(frozen=True)
class KernelSpec:
    sigma: float

    def __post_init__(self):
        s = float(self.sigma)
        if not np.isfinite(s) or s <= 0:
            raise ValueError(f"bandwidth must be positive and finite, got {self.sigma!r}")
        object.__setattr__(self, "sigma", s)


def _as_2d(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got array with shape {A.shape}")
    return A


def sq_distances(A, B):
    """Pairwise squared Euclidean distances, clamped at zero."""
    A = _as_2d(A)
    B = _as_2d(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} columns")
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    D = aa[:, None] + bb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    return D


def eval_kernel(x, x_prime, spec):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if x.shape != x_prime.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    d = x - x_prime
    return float(np.exp(-(d @ d) / spec.sigma))


def gram(A, B, spec):
    """Kernel matrix with entries ``k(A[i], B[j])``."""
    return np.exp(-sq_distances(A, B) / spec.sigma)


def median_heuristic(X):
    """Bandwidth equal to the median pairwise (unsquared) distance over pairs i < j.

    Even-length lists take the midpoint of the two central order statistics
    (``np.median`` semantics).
    """
    X = _as_2d(X)
    n = X.shape[0]
    if n < 2:
        raise DegenerateDataError("median heuristic needs at least two points")
    iu = np.triu_indices(n, k=1)
    dist = np.sqrt(sq_distances(X, X)[iu])
    sigma = float(np.median(dist))
    if not sigma > 0:
        raise DegenerateDataError("median pairwise distance is zero (points coincide)")
    return KernelSpec(sigma)
