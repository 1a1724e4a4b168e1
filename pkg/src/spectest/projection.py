"""Projector that strips the score directions out of residuals and kernel columns.

``Projector(G)`` represents ``I - G (G'G)^{-1} G'`` without forming the n x n
matrix: every application is a d x d Cholesky solve.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DegenerateDataError

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class Projector:
    G: np.ndarray
    factor: tuple | None
    d_effective: int
    ridge: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.G.shape[0]

    def apply(self, v):
        return project(self, v)


def build_projector(G):
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    n, d = G.shape
    if not np.all(np.isfinite(G)):
        raise ValueError("score matrix contains non-finite values")
    if d == 0:
        return Projector(G, None, 0)
    if n <= d:
        raise DegenerateDataError(f"projector needs n > d, got n={n}, d={d}")
    if not np.any(G):
        raise DegenerateDataError("score matrix is identically zero")

    GtG = G.T @ G
    cond = np.linalg.cond(GtG)
    ridge = 0.0
    diagnostics = {"condition": float(cond)}
    if not np.isfinite(cond) or cond > COND_LIMIT:
        ridge = RIDGE_SCALE * np.trace(GtG) / d
        GtG = GtG + ridge * np.eye(d)
        diagnostics["ridge"] = ridge
        warnings.warn(f"ill-conditioned score Gram (cond={cond:.3g}); added ridge {ridge:.3g}",
                      RuntimeWarning, stacklevel=2)
    factor = linalg.cho_factor(GtG, lower=True, check_finite=False)
    return Projector(G, factor, d, ridge, diagnostics)


def project(p, v):
    """Apply the projector to a vector or to each column of a matrix."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != p.n:
        raise ValueError(f"length {v.shape[0]} does not match projector size {p.n}")
    if p.d_effective == 0:
        return v.copy()
    coef = linalg.cho_solve(p.factor, p.G.T @ v, check_finite=False)
    return v - p.G @ coef


def project_rows(p, E):
    """Project every row of a (B, n) array; used for bootstrap draws."""
    E = np.asarray(E, dtype=float)
    if E.shape[-1] != p.n:
        raise ValueError(f"row length {E.shape[-1]} does not match projector size {p.n}")
    if p.d_effective == 0:
        return E.copy()
    coef = linalg.cho_solve(p.factor, p.G.T @ E.T, check_finite=False)
    return E - (p.G @ coef).T


def project_kernel_columns(p, K):
    """Projected kernel columns ``Pi' K``; ``Pi`` is symmetric so this is ``Pi K``."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise ValueError("expected a matrix of kernel columns")
    return project(p, K)


def as_matrix(p):
    """Dense n x n matrix of the projector (small n only; for checks)."""
    return project(p, np.eye(p.n))
