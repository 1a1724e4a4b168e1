"""Independent reference implementations used only by the tests.

They are written for clarity, not speed, and share no code with the package.
"""
import itertools
import math

import numpy as np


def gaussian(x, y, sigma):
    return math.exp(-sum((a - b) ** 2 for a, b in zip(x, y)) / sigma)


def median_pairwise(X):
    d = []
    for i, j in itertools.combinations(range(len(X)), 2):
        d.append(math.sqrt(sum((a - b) ** 2 for a, b in zip(X[i], X[j]))))
    d.sort()
    m = len(d)
    return d[m // 2] if m % 2 else 0.5 * (d[m // 2 - 1] + d[m // 2])


def double_sum(eps, K):
    n = len(eps)
    return sum(eps[i] * K[i][j] * eps[j] for i in range(n) for j in range(n)) / n


def mean_projection_loop(eps, K, eta):
    n = len(eps)
    total = 0.0
    for i in range(n):
        for j in range(len(eta)):
            total += eta[j] * eps[i] * K[i][j]
    return total / n


def dense_projector(G):
    G = np.atleast_2d(G)
    if G.shape[0] == 1:
        G = G.T
    return np.eye(G.shape[0]) - G @ np.linalg.inv(G.T @ G) @ G.T


def qr_lstsq(X, y):
    Q, R = np.linalg.qr(X)
    return np.linalg.solve(R, Q.T @ y)


def _capped_simplex(v, C, target):
    """Euclidean projection of v onto {0 <= a <= C, sum a = target} (exact, by breakpoints)."""
    bps = np.sort(np.concatenate([v, v - C]))

    def mass(tau):
        return np.clip(v - tau, 0.0, C).sum()

    lo_i, hi_i = 0, bps.size - 1
    # mass is nonincreasing in tau; mass(bps[0]) = n C >= target, mass(bps[-1]) = 0 <= target
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if mass(bps[mid]) >= target:
            lo_i = mid
        else:
            hi_i = mid
    a, b = bps[lo_i], bps[hi_i]
    ma, mb = mass(a), mass(b)
    tau = a if ma == mb else a + (ma - target) * (b - a) / (ma - mb)
    return np.clip(v - tau, 0.0, C)


def box_qp(Q, groups, C, targets, iters=100_000, tol=1e-14):
    """FISTA with adaptive restart for min 0.5 a'Qa on group-wise capped simplices."""
    Q = np.asarray(Q, float)
    groups = np.asarray(groups)
    L = max(np.linalg.eigvalsh(Q)[-1], 1e-12)

    def proj(v):
        out = np.empty_like(v)
        for g, t in enumerate(targets):
            m = groups == g
            out[m] = _capped_simplex(v[m], C, t)
        return out

    x = proj(np.zeros(Q.shape[0]))
    y, t = x.copy(), 1.0
    f = lambda a: 0.5 * a @ Q @ a  # noqa: E731
    stall, best = 0, f(x)
    for k in range(iters):
        # optimality certificate: the iterate's own first-order gap
        if k % 25 == 0 and kkt_gap(x, Q, groups, C) <= 1e-11:
            break
        x_new = proj(y - (Q @ y) / L)
        if np.max(np.abs(x_new - x)) < tol:
            x = min(x, x_new, key=f)
            break
        # stop once 500 iterations bring no objective gain above 1e-15; on a
        # singular Q the iterates can keep drifting along a flat face
        if f(x_new) < best - 1e-15:
            best, stall = f(x_new), 0
        else:
            stall += 1
        if stall >= 500:
            x = min(x, x_new, key=f)
            break
        if f(x_new) > f(x) + 1e-15 * abs(f(x)):  # restart momentum
            y, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
    return x, f(x)


def kkt_gap(alpha, Q, groups, C, bound_tol=1e-12):
    """Largest within-group violation max{grad: a>0} - min{grad: a<C}."""
    grad = Q @ alpha
    worst = -np.inf
    for g in np.unique(groups):
        m = groups == g
        down = grad[m & (alpha > bound_tol * C)]
        up = grad[m & (alpha < C * (1 - bound_tol))]
        if down.size and up.size:
            worst = max(worst, down.max() - up.min())
    return worst
