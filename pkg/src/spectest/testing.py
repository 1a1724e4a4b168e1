"""SVM-direction specification tests: split, learn a direction, test on held-out data.

The statistic is the mean of ``s_i = eps_p[i] * w(x_i)`` over the test split,
where ``eps_p`` are test residuals with the score directions projected out and
``w = sum_j eta_j k(x_j, .)`` is learned by an SVM on the training split.
``n * (mean / sd)^2`` is asymptotically chi-square(1); critical values can also
come from a multiplier bootstrap of ``sqrt(n) * mean``.
"""
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateDataError, SpecTestError
from .kernel import KernelSpec, gram, median_heuristic
from .model import fit, residuals
from .projection import build_projector, project
from .svm import ShiftedTrainingSet, SvmConfig, shift_values, train_nu_svc, train_ocsvm

MAMMEN_LOW = 0.5 * (1 - np.sqrt(5))
MAMMEN_HIGH = 0.5 * (1 + np.sqrt(5))
MAMMEN_P_LOW = (1 + np.sqrt(5)) / (2 * np.sqrt(5))
MULTIPLIERS = ("mammen", "rademacher", "normal")
VARIANTS = ("nusvm", "ocsvm")


@dataclass(frozen=True)
class SplitPlan:
    train_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 500
    multiplier: str = "mammen"
    seed: int = 0
    levels: tuple = (0.10, 0.05, 0.01)

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if self.multiplier not in MULTIPLIERS:
            raise ValueError(f"unknown multiplier {self.multiplier!r}; choose from {MULTIPLIERS}")
        if any(not 0 < a < 1 for a in self.levels):
            raise ValueError("levels must lie in (0, 1)")


@dataclass
class TStat:
    mu_hat: float
    sigma_hat: float
    t_stat: float
    chi_sq: float
    p_analytic: float
    n: int


@dataclass
class TestResult:
    t_stat: float
    chi_sq: float
    p_analytic: float
    mu_hat: float
    sigma_hat: float
    n_test: int
    support_size: int
    eta_l1: float
    variant: str
    estimator: str
    sigma: float
    nu: float
    seed: int
    p_bootstrap: float | None = None
    boot_crit: dict = field(default_factory=dict)
    boot_stat: float | None = None
    rho: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def reject(self, level, mode="bootstrap"):
        if mode == "analytic":
            return self.p_analytic <= level
        if level not in self.boot_crit:
            raise KeyError(f"no bootstrap critical value at level {level}")
        return abs(self.boot_stat) > self.boot_crit[level]

    def to_dict(self):
        return {
            "t_stat": self.t_stat,
            "chi_sq": self.chi_sq,
            "p_analytic": self.p_analytic,
            "p_bootstrap": self.p_bootstrap,
            "boot_crit": {f"{k:g}": v for k, v in sorted(self.boot_crit.items(), reverse=True)},
            "n_test": self.n_test,
            "support_size": self.support_size,
            "variant": self.variant,
            "estimator": self.estimator,
            "sigma": self.sigma,
            "nu": self.nu,
            "seed": self.seed,
        }


def split(data, plan, min_size=None):
    """Seeded random partition into (train, test)."""
    n = data.n
    if n < 2:
        raise DegenerateDataError("need at least two observations to split")
    d = data.design().shape[1]
    need = max(2, d + 1) if min_size is None else min_size
    n_train = int(round(plan.train_fraction * n))
    n_test = n - n_train
    if n_train < need or n_test < need:
        raise DegenerateDataError(
            f"split of n={n} at fraction {plan.train_fraction} gives train={n_train}, "
            f"test={n_test}; each side needs at least {need}")
    perm = np.random.default_rng(plan.seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return data.subset(train_idx), data.subset(test_idx)


def _direction_values(K_cross, eta):
    K_cross = np.asarray(K_cross, dtype=float)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if K_cross.ndim != 2 or K_cross.shape[1] != eta.shape[0]:
        raise ValueError(f"kernel block {K_cross.shape} does not match {eta.shape[0]} weights")
    return K_cross @ eta


def mean_projection(eps_p, K_cross, eta):
    """``(1/n) sum_i eps_p[i] sum_j eta_j K[i, j]``."""
    eps_p = np.asarray(eps_p, dtype=float)
    w = _direction_values(K_cross, eta)
    if w.shape[0] != eps_p.shape[0]:
        raise ValueError("residuals and kernel rows differ in length")
    return float(np.mean(eps_p * w))


def t_statistic_from_scores(s):
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if n < 2:
        raise DegenerateDataError("t-statistic needs at least two observations")
    mu = float(s.mean())
    sd = float(s.std(ddof=1))
    scale = float(np.max(np.abs(s)))
    if sd == 0.0 or sd <= 1e-13 * scale:
        raise DegenerateDataError("projected scores have zero variance")
    t = mu / sd
    chi = n * t * t
    return TStat(mu, sd, t, chi, float(stats.chi2.sf(chi, df=1)), n)


def t_statistic(eps_p, K_cross, eta):
    eps_p = np.asarray(eps_p, dtype=float)
    w = _direction_values(K_cross, eta)
    if w.shape[0] != eps_p.shape[0]:
        raise ValueError("residuals and kernel rows differ in length")
    return t_statistic_from_scores(eps_p * w)


def draw_multipliers(n, kind="mammen", rng=None, size=None):
    """i.i.d. mean-zero, unit-variance multipliers; shape ``(n,)`` or ``(size, n)``."""
    rng = np.random.default_rng(rng)
    shape = (n,) if size is None else (size, n)
    if kind == "mammen":
        low = rng.random(shape) < MAMMEN_P_LOW
        return np.where(low, MAMMEN_LOW, MAMMEN_HIGH)
    if kind == "rademacher":
        return rng.integers(0, 2, size=shape) * 2.0 - 1.0
    if kind == "normal":
        return rng.standard_normal(shape)
    raise ValueError(f"unknown multiplier {kind!r}")


def bootstrap_distribution(eps_hat_test, projector, K_cross, eta, cfg, multipliers=None):
    """Multiplier bootstrap draws of ``sqrt(n) * mean``.

    The given residuals are multiplied by the draws and only then projected.
    ``multipliers`` (shape (B, n)) overrides the random draws.

    Notes
    -----
    The projector is symmetric, so ``(Pi (eps * v)) @ w == v @ (eps * (Pi w))``.
    Projecting ``w`` once turns the whole bootstrap into a single
    matrix-vector product with the (B, n) multiplier array.
    """
    eps = np.asarray(eps_hat_test, dtype=float)
    n = eps.shape[0]
    w = _direction_values(K_cross, eta)
    if w.shape[0] != n:
        raise ValueError("residuals and kernel rows differ in length")
    if multipliers is None:
        V = draw_multipliers(n, cfg.multiplier, np.random.default_rng(cfg.seed), size=cfg.B)
    else:
        V = np.atleast_2d(np.asarray(multipliers, dtype=float))
        if V.shape[1] != n:
            raise ValueError("multiplier rows must match the number of residuals")
    return V @ (eps * project(projector, w)) / np.sqrt(n)


def bootstrap_inference(stat, draws, levels):
    """Two-sided p-value and critical values of ``|stat|`` from bootstrap draws."""
    a = np.abs(np.asarray(draws))
    p = (1.0 + np.sum(a >= abs(stat))) / (a.size + 1.0)
    crit = {float(lv): float(np.quantile(a, 1.0 - lv)) for lv in levels}
    return float(p), crit


@contextmanager
def _stage(name):
    try:
        yield
    except (SpecTestError, ValueError, np.linalg.LinAlgError) as exc:
        if exc.args and isinstance(exc.args[0], str) and not exc.args[0].startswith("["):
            exc.args = (f"[{name}] {exc.args[0]}",) + exc.args[1:]
        exc.stage = name
        raise


def learn_direction(train, model, kspec, variant, svm_cfg):
    """Fit the SVM on the training split and return its direction."""
    bundle = residuals(model, train)
    P = build_projector(bundle.G)
    if variant == "nusvm":
        y_p = project(P, train.y)
        m_p = project(P, bundle.fitted)
        z, e = shift_values(np.concatenate([y_p, m_p]), svm_cfg.shift_pad)
        m = train.n
        ts = ShiftedTrainingSet(np.vstack([train.X, train.X]), z, e,
                                np.concatenate([np.ones(m), -np.ones(m)]))
        return train_nu_svc(ts, kspec, svm_cfg)
    if variant == "ocsvm":
        eps_p = project(P, bundle.residuals)
        z, e = shift_values(eps_p, svm_cfg.shift_pad)
        return train_ocsvm(ShiftedTrainingSet(train.X, z, e), kspec, svm_cfg)
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


def resolve_kernel(sigma, X):
    if sigma is None or sigma == "median":
        return median_heuristic(X)
    if isinstance(sigma, KernelSpec):
        return sigma
    return KernelSpec(float(sigma))


def run_test(data, variant="nusvm", estimator="ols", sigma="median", svm_cfg=SvmConfig(),
             boot_cfg=BootstrapConfig(), plan=SplitPlan(), lasso_kwargs=None,
             boot_residuals="projected"):
    """Full pipeline on one dataset; ``boot_cfg=None`` skips the bootstrap.

    ``boot_residuals`` picks what the multipliers act on: ``"projected"``
    (default) uses the projected test residuals, ``"raw"`` the residuals of
    the training-split fit. The raw form carries the training fit's estimation
    error into every draw, which inflates the bootstrap spread whenever the
    training split is small relative to the number of covariates.
    """
    if boot_residuals not in ("projected", "raw"):
        raise ValueError("boot_residuals must be 'projected' or 'raw'")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    kw = lasso_kwargs or {}
    with _stage("split"):
        train, test = split(data, plan)
    with _stage("fit"):
        model = fit(train, estimator, **kw) if estimator == "lasso" else fit(train, estimator)
    with _stage("kernel"):
        kspec = resolve_kernel(sigma, train.X)
    with _stage("svm"):
        direction = learn_direction(train, model, kspec, variant, svm_cfg)
    with _stage("statistic"):
        tb = residuals(model, test)
        scale = max(float(np.max(np.abs(test.y))), 1.0)
        if float(np.max(np.abs(tb.residuals))) <= 1e-10 * scale:
            raise DegenerateDataError("test residuals are identically zero")
        P_test = build_projector(tb.G)
        eps_p = project(P_test, tb.residuals)
        K_cross = gram(test.X, direction.support_points, kspec)
        ts = t_statistic(eps_p, K_cross, direction.weights)

    result = TestResult(
        t_stat=ts.t_stat, chi_sq=ts.chi_sq, p_analytic=ts.p_analytic,
        mu_hat=ts.mu_hat, sigma_hat=ts.sigma_hat, n_test=ts.n,
        support_size=direction.size, eta_l1=float(np.abs(direction.weights).sum()),
        variant=variant, estimator=estimator, sigma=kspec.sigma, nu=svm_cfg.nu,
        seed=plan.seed, rho=direction.rho,
        diagnostics={"svm_iterations": direction.iterations, "kkt_gap": direction.kkt_gap,
                     "support_fallback": direction.fallback,
                     "lambda": model.lam, "projector_ridge": P_test.ridge},
    )
    if boot_cfg is not None:
        with _stage("bootstrap"):
            base = eps_p if boot_residuals == "projected" else tb.residuals
            draws = bootstrap_distribution(base, P_test, K_cross, direction.weights, boot_cfg)
            stat = np.sqrt(ts.n) * ts.mu_hat
            p, crit = bootstrap_inference(stat, draws, boot_cfg.levels)
        result.p_bootstrap = p
        result.boot_crit = crit
        result.boot_stat = float(stat)
    return result
