"""V-statistic reference tests (ICM, KCM, GP) with bootstrap p-values.

All three use ``n T = (1/n) sum_ij e_i k(x_i, x_j) e_j`` on the full sample:

* ICM: fixed bandwidth 2, raw residuals, wild bootstrap that refits the model
  on ``y* = fitted + e * v``.
* KCM: median-heuristic bandwidth, raw residuals, multiplier bootstrap
  ``(e*v)' K (e*v) / n`` without refitting or recentering.
* GP: as KCM but on projected residuals; the bootstrap multiplies the raw
  residuals and then projects.
"""
from dataclasses import dataclass, field

import numpy as np

from .kernel import gram
from .model import fit, fit_lasso, residuals
from .projection import build_projector, project, project_rows
from .testing import BootstrapConfig, draw_multipliers, resolve_kernel

BASELINES = ("icm", "kcm", "gp")


@dataclass
class VStatResult:
    stat: float
    p_bootstrap: float
    B: int
    n: int
    sigma: float
    residual_mode: str
    variant: str
    estimator: str
    seed: int
    boot_crit: dict = field(default_factory=dict)

    def reject(self, level, mode="bootstrap"):
        if mode != "bootstrap":
            raise ValueError("V-statistic tests only have bootstrap critical values")
        return self.stat > self.boot_crit[level]

    def to_dict(self):
        return {
            "t_stat": None,
            "chi_sq": None,
            "p_analytic": None,
            "p_bootstrap": self.p_bootstrap,
            "boot_crit": {f"{k:g}": v for k, v in sorted(self.boot_crit.items(), reverse=True)},
            "n_test": self.n,
            "support_size": None,
            "variant": self.variant,
            "estimator": self.estimator,
            "sigma": self.sigma,
            "nu": None,
            "seed": self.seed,
            "stat": self.stat,
            "residual_mode": self.residual_mode,
        }


def v_statistic(eps, K):
    eps = np.asarray(eps, dtype=float)
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != eps.shape[0]:
        raise ValueError(f"kernel {K.shape} does not match {eps.shape[0]} residuals")
    return float(eps @ K @ eps) / eps.shape[0]


def v_statistics_rows(E, K):
    """V-statistic for every row of a (B, n) residual array.

    One quadratic form per draw, so the cost is B matrix-vector products with
    the n x n kernel.
    """
    E = np.atleast_2d(E)
    out = np.empty(E.shape[0])
    for b, e in enumerate(E):
        out[b] = e @ (K @ e)
    return out / E.shape[1]


def _summarize(stat, draws, levels, scale):
    """Upper-tail p-value; draws within rounding of ``stat`` count as ties.

    ``scale`` is the size of a typical squared response, so an exact fit
    (residuals at rounding level) gives ``p = 1`` rather than noise.
    """
    tie = 1e-12 * scale
    p = (1.0 + np.sum(draws >= stat - tie)) / (draws.size + 1.0)
    crit = {float(lv): float(np.quantile(draws, 1.0 - lv)) for lv in levels}
    return float(p), crit


def _scale(data):
    return max(float(np.mean(data.y**2)), np.finfo(float).tiny)


def _multipliers(n, cfg):
    return draw_multipliers(n, cfg.multiplier, np.random.default_rng(cfg.seed), size=cfg.B)


def icm_test(data, estimator="ols", boot_cfg=BootstrapConfig(), sigma=2.0, lasso_kwargs=None):
    kw = lasso_kwargs or {}
    model = fit(data, estimator, **kw) if estimator == "lasso" else fit(data, estimator)
    rb = residuals(model, data)
    kspec = resolve_kernel(sigma, data.X)
    K = gram(data.X, data.X, kspec)
    stat = v_statistic(rb.residuals, K)
    V = _multipliers(data.n, boot_cfg)
    Ystar = rb.fitted[None, :] + rb.residuals[None, :] * V
    D = data.design()
    if estimator == "ols":
        theta, *_ = np.linalg.lstsq(D, Ystar.T, rcond=None)
        Estar = Ystar - (D @ theta).T
    else:
        # refit each draw at the penalty selected on the original sample
        Estar = np.empty_like(Ystar)
        for b in range(Ystar.shape[0]):
            star = type(data)(data.X, Ystar[b], data.intercept)
            m = fit_lasso(star, lam=model.lam)
            Estar[b] = Ystar[b] - m.predict(data.X)
    draws = v_statistics_rows(Estar, K)
    p, crit = _summarize(stat, draws, boot_cfg.levels, _scale(data))
    return VStatResult(stat, p, boot_cfg.B, data.n, kspec.sigma, "raw", "icm", estimator,
                       boot_cfg.seed, crit)


def kcm_test(data, estimator="ols", boot_cfg=BootstrapConfig(), sigma="median", lasso_kwargs=None):
    kw = lasso_kwargs or {}
    model = fit(data, estimator, **kw) if estimator == "lasso" else fit(data, estimator)
    rb = residuals(model, data)
    kspec = resolve_kernel(sigma, data.X)
    K = gram(data.X, data.X, kspec)
    stat = v_statistic(rb.residuals, K)
    E = rb.residuals[None, :] * _multipliers(data.n, boot_cfg)
    draws = v_statistics_rows(E, K)
    p, crit = _summarize(stat, draws, boot_cfg.levels, _scale(data))
    return VStatResult(stat, p, boot_cfg.B, data.n, kspec.sigma, "raw", "kcm", estimator,
                       boot_cfg.seed, crit)


def gp_test(data, estimator="ols", boot_cfg=BootstrapConfig(), sigma="median", lasso_kwargs=None,
            projector=None):
    """GP test; ``projector`` overrides the one built from the full-sample scores."""
    kw = lasso_kwargs or {}
    model = fit(data, estimator, **kw) if estimator == "lasso" else fit(data, estimator)
    rb = residuals(model, data)
    P = build_projector(rb.G) if projector is None else projector
    kspec = resolve_kernel(sigma, data.X)
    K = gram(data.X, data.X, kspec)
    stat = v_statistic(project(P, rb.residuals), K)
    E = project_rows(P, rb.residuals[None, :] * _multipliers(data.n, boot_cfg))
    draws = v_statistics_rows(E, K)
    p, crit = _summarize(stat, draws, boot_cfg.levels, _scale(data))
    return VStatResult(stat, p, boot_cfg.B, data.n, kspec.sigma, "projected", "gp", estimator,
                       boot_cfg.seed, crit)


def run_baseline(data, variant, estimator="ols", boot_cfg=BootstrapConfig(), sigma=None,
                 lasso_kwargs=None):
    if variant == "icm":
        return icm_test(data, estimator, boot_cfg, 2.0 if sigma is None else sigma, lasso_kwargs)
    if variant == "kcm":
        return kcm_test(data, estimator, boot_cfg, sigma or "median", lasso_kwargs)
    if variant == "gp":
        return gp_test(data, estimator, boot_cfg, sigma or "median", lasso_kwargs)
    raise ValueError(f"unknown baseline {variant!r}; choose from {BASELINES}")
