"""nu-SVC and one-class SVM duals solved by SMO, returning the learned direction.

Both duals are instances of

    minimize    0.5 * a' Q a
    subject to  0 <= a_i <= C,   sum_{i in group g} a_i = target_g

with the scalar magnitudes (and labels) folded into ``Q``:

* one-class:  Q_ij = e_i e_j k(x_i, x_j), one group, target 1, C = 1/(nu n)
* nu-SVC:     Q_ij = z_i z_j l_i l_j k(x_i, x_j), one group per label, each
  with target nu/2, C = 1/l. The two group sums encode sum a_i l_i = 0 and
  sum a_i = nu.

Pairs are chosen by the maximal violating pair rule inside a group, so every
update keeps the equality constraints intact.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateDataError
from .kernel import gram


@dataclass(frozen=True)
class SvmConfig:
    nu: float = 0.5
    tol: float = 1e-6
    max_iter: int = 200_000
    shift_pad: float = 0.1

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise ValueError(f"nu must lie in (0, 1], got {self.nu}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.shift_pad > 0:
            raise ValueError("shift_pad must be positive")


@dataclass
class ShiftedTrainingSet:
    X: np.ndarray
    z: np.ndarray
    shift: float
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.z = np.asarray(self.z, dtype=float).ravel()
        if self.X.shape[0] != self.z.shape[0]:
            raise ValueError("points and magnitudes differ in length")
        if not np.all(self.z > 0):
            raise ValueError("shifted magnitudes must be strictly positive")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float).ravel()
            if self.labels.shape != self.z.shape or not np.all(np.isin(self.labels, (-1.0, 1.0))):
                raise ValueError("labels must be +1/-1, one per point")


@dataclass
class Direction:
    """RKHS direction ``w = sum_j eta_j k(x_j, .)`` learned on the training split."""

    support_indices: np.ndarray
    weights: np.ndarray
    support_points: np.ndarray
    rho: float
    alphas: np.ndarray
    offset: float = 0.0
    objective: float = float("nan")
    iterations: int = 0
    kkt_gap: float = 0.0
    fallback: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def size(self):
        return len(self.support_indices)

    def evaluate(self, X, spec):
        """``w(x)`` at each row of X."""
        return gram(X, self.support_points, spec) @ self.weights


@dataclass
class DualSolution:
    alpha: np.ndarray
    grad: np.ndarray
    iterations: int
    gap: float
    objective: float


def shift_values(raw, pad=0.1):
    """Shift so every value is positive: ``e = max|raw| + pad``, returns ``(raw + e, e)``."""
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.size == 0:
        raise ValueError("cannot shift an empty vector")
    if not np.all(np.isfinite(raw)):
        raise ValueError("values to shift must be finite")
    if not pad > 0:
        raise ValueError("pad must be positive")
    e = float(np.max(np.abs(raw)) + pad)
    return raw + e, e


def _initial_alpha(groups, C, targets):
    """Fill each group in index order up to its target (libsvm convention)."""
    alpha = np.zeros(groups.shape[0])
    for g, target in enumerate(targets):
        remaining = target
        for i in np.flatnonzero(groups == g):
            if remaining <= 0:
                break
            alpha[i] = min(C, remaining)
            remaining -= alpha[i]
    return alpha


def solve_dual(Q, groups, C, targets, tol=1e-6, max_iter=200_000, alpha0=None):
    """SMO on the group-constrained box QP described in the module docstring.

    Stops when, within every group, ``max{grad_i : a_i > 0} - min{grad_j : a_j < C}``
    is at most ``tol``.
    """
    Q = np.asarray(Q, dtype=float)
    groups = np.asarray(groups, dtype=int)
    n = Q.shape[0]
    targets = [float(t) for t in targets]
    for g, t in enumerate(targets):
        size = int(np.sum(groups == g))
        if t > C * size * (1 + 1e-12) or t < 0:
            raise ValueError(f"group {g} target {t} infeasible for box [0, {C}] with {size} points")

    alpha = _initial_alpha(groups, C, targets) if alpha0 is None else np.array(alpha0, float)
    grad = Q @ alpha
    diag = np.diag(Q).copy()
    masks = [groups == g for g in range(len(targets))]
    eps = 1e-12 * C

    it = 0
    gap = np.inf
    while True:
        can_down = alpha > eps
        can_up = alpha < C - eps
        best = (-np.inf, -1, -1)
        for m in masks:
            down = np.where(m & can_down, grad, -np.inf)
            up = np.where(m & can_up, grad, np.inf)
            i = int(np.argmax(down))
            j = int(np.argmin(up))
            v = down[i] - up[j]
            if v > best[0]:
                best = (v, i, j)
        gap, i, j = best
        if gap <= tol or it >= max_iter:
            break
        curv = diag[i] + diag[j] - 2.0 * Q[i, j]
        step = gap / max(curv, 1e-12)
        step = min(step, alpha[i], C - alpha[j])
        ai = alpha[i] - step
        aj = alpha[j] + step
        # snap to bounds so the active set is exact
        if ai <= eps:
            aj += ai
            ai = 0.0
        if aj >= C - eps:
            ai += aj - C
            aj = C
        di, dj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * di + Q[:, j] * dj
        it += 1

    if gap > tol:
        raise ConvergenceError(
            f"SMO stopped after {it} iterations with KKT gap {gap:.3g} > {tol:.3g}",
            gap=float(gap), iterations=it)

    # exact feasibility: push rounding residue of each group sum onto a free variable
    for g, m in enumerate(masks):
        r = targets[g] - alpha[m].sum()
        if r != 0.0:
            idx = np.flatnonzero(m & (alpha > 0) & (alpha < C))
            if idx.size == 0:
                idx = np.flatnonzero(m & (alpha > 0))
            k = idx[0] if idx.size else np.flatnonzero(m)[0]
            alpha[k] = min(max(alpha[k] + r, 0.0), C)
    grad = Q @ alpha
    obj = 0.5 * float(alpha @ grad)
    return DualSolution(alpha, grad, it, float(gap), obj)


def _support(alpha):
    thr = 1e-8 * alpha.max()
    idx = np.flatnonzero(alpha > thr)
    fallback = False
    if idx.size == 0:
        idx = np.array([int(np.argmax(alpha))])
        fallback = True
    return idx, fallback


def _free_mean(grad, alpha, C, mask):
    free = mask & (alpha > 1e-12 * C) & (alpha < C * (1 - 1e-12))
    if np.any(free):
        return float(grad[free].mean())
    # no free vector: midpoint of the feasible interval (libsvm convention)
    ub = grad[mask & (alpha > 0)]
    lb = grad[mask & (alpha < C)]
    hi = ub.max() if ub.size else np.inf
    lo = lb.min() if lb.size else -np.inf
    if np.isfinite(hi) and np.isfinite(lo):
        return float(0.5 * (hi + lo))
    return float(hi if np.isfinite(hi) else lo)


def train_ocsvm(ts, kspec, cfg=SvmConfig()):
    """One-class SVM on the points ``z_i k(x_i, .)``; weights ``eta_j = a_j z_j``."""
    n = ts.z.shape[0]
    if n < 2:
        raise DegenerateDataError("one-class SVM needs at least two points")
    if cfg.nu * n < 1 - 1e-12:
        raise ValueError(f"infeasible: nu * n = {cfg.nu * n:.3g} < 1")
    C = 1.0 / (cfg.nu * n)
    K = gram(ts.X, ts.X, kspec)
    Q = np.outer(ts.z, ts.z) * K
    groups = np.zeros(n, dtype=int)
    sol = solve_dual(Q, groups, C, [1.0], cfg.tol, cfg.max_iter)
    idx, fallback = _support(sol.alpha)
    rho = _free_mean(sol.grad, sol.alpha, C, np.ones(n, bool))
    return Direction(
        support_indices=idx,
        weights=sol.alpha[idx] * ts.z[idx],
        support_points=ts.X[idx],
        rho=rho,
        alphas=sol.alpha,
        objective=sol.objective,
        iterations=sol.iterations,
        kkt_gap=sol.gap,
        fallback=fallback,
        extra={"C": C, "grad": sol.grad},
    )


def train_nu_svc(ts, kspec, cfg=SvmConfig()):
    """nu-SVC on labelled points ``z_i k(x_i, .)``; weights ``eta_j = a_j z_j l_j``.

    Notes
    -----
    When both classes sit on the same covariates (as in the specification
    test, where point ``i`` appears once with the shifted response and once
    with the shifted fitted value) the dual optimum usually has ``w = 0``:
    choosing ``a_i+ z_i+ = a_i- z_i-`` for every ``i`` is feasible. The
    returned direction is then the small remainder left when SMO meets the
    KKT tolerance. Its scale is tiny but irrelevant, since the t-statistic is
    invariant to rescaling ``w``; it depends only on the training split, so
    the test on held-out data stays valid.
    """
    if ts.labels is None:
        raise ValueError("nu-SVC needs labels")
    l = ts.labels
    n_pos = int(np.sum(l > 0))
    n_neg = int(np.sum(l < 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("nu-SVC needs both classes present")
    ell = l.shape[0]
    if cfg.nu > 2.0 * min(n_pos, n_neg) / ell * (1 + 1e-12):
        raise ValueError(f"infeasible nu={cfg.nu}: must not exceed {2 * min(n_pos, n_neg) / ell:.3g}")
    C = 1.0 / ell
    K = gram(ts.X, ts.X, kspec)
    s = ts.z * l
    Q = np.outer(s, s) * K
    groups = (l < 0).astype(int)
    sol = solve_dual(Q, groups, C, [cfg.nu / 2, cfg.nu / 2], cfg.tol, cfg.max_iter)
    idx, fallback = _support(sol.alpha)
    r_pos = _free_mean(sol.grad, sol.alpha, C, l > 0)
    r_neg = _free_mean(sol.grad, sol.alpha, C, l < 0)
    return Direction(
        support_indices=idx,
        weights=sol.alpha[idx] * s[idx],
        support_points=ts.X[idx],
        rho=0.5 * (r_pos + r_neg),
        alphas=sol.alpha,
        offset=0.5 * (r_neg - r_pos),
        objective=sol.objective,
        iterations=sol.iterations,
        kkt_gap=sol.gap,
        fallback=fallback,
        extra={"C": C, "grad": sol.grad},
    )
