"""Data-generating processes and the Monte-Carlo size/power harness."""
import csv
import io
import json
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .baselines import BASELINES, run_baseline, v_statistics_rows
from .errors import SpecTestError
from .kernel import gram
from .model import Dataset, fit_ols, residuals
from .projection import build_projector, project_rows
from .svm import SvmConfig
from .testing import (VARIANTS, BootstrapConfig, SplitPlan, bootstrap_distribution,
                      draw_multipliers, learn_direction, resolve_kernel, run_test, split)

DGP_IDS = ("1", "2", "3", "4", "5", "1*", "2*", "3*")
TESTS = VARIANTS + BASELINES


@dataclass(frozen=True)
class DgpSpec:
    id: str
    q: int = 10
    n: int = 400
    c: float = 0.25
    seed: int = 0
    beta0: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        if self.id not in DGP_IDS:
            raise ValueError(f"unknown DGP id {self.id!r}; choose from {DGP_IDS}")
        if self.q < 1 or self.n < 1:
            raise ValueError("q and n must be positive")
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not self.id.endswith("*") and self.q // 10 < 1:
            raise ValueError("DGPs 1-5 need q >= 10 so that floor(0.1 q) >= 1")
        if self.id.endswith("*") and self.q < 2:
            raise ValueError("intercept DGPs need q >= 2")

    @property
    def intercept(self):
        return self.id.endswith("*")

    @property
    def label(self):
        return f"DGP{self.id}"


def true_index(q):
    """theta_0: first floor(0.1 q) entries one, the rest zero."""
    theta = np.zeros(q)
    theta[: q // 10] = 1.0
    return theta


def gen_dgp(spec, rng=None):
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    n, q, c = spec.n, spec.q, spec.c
    eps = None
    if not spec.intercept:
        X = rng.standard_normal((n, q))
        u = X @ true_index(q)
        eps = rng.standard_normal(n)
        mean = {
            "1": u,
            "2": u + c * np.exp(-u**2),
            "3": u + 3 * c * np.cos(0.6 * np.pi * u),
            "4": u + 0.5 * c * u**2,
            "5": u + 0.5 * c * np.exp(0.25 * u),
        }[spec.id]
        return Dataset(X, mean + eps, intercept=False)

    h = q // 2
    U = rng.uniform(0.0, 1.0, (n, h))
    if spec.id == "1*":
        sd = np.ones(q - h)
    else:
        # variance 1 + 0.1 (i - h) for the i-th (1-based) normal covariate
        sd = np.sqrt(1.0 + 0.1 * np.arange(1, q - h + 1))
    N = rng.standard_normal((n, q - h)) * sd
    X = np.column_stack([U, N])
    eps = rng.standard_normal(n)
    mean = spec.beta0 + X @ np.full(q, spec.beta)
    norm = np.linalg.norm(X, axis=1)
    if spec.id == "2*":
        mean = mean + norm
    elif spec.id == "3*":
        mean = mean + norm / np.sqrt(n)
    return Dataset(X, mean + eps, intercept=True)


@dataclass(frozen=True)
class McConfig:
    R: int = 1000
    levels: tuple = (0.10, 0.05, 0.01)
    B: int = 500
    tests: tuple = ("nusvm", "ocsvm")
    workers: int = 1
    base_seed: int = 0
    estimator: str = "ols"
    train_fraction: float = 0.1
    nu: float = 0.5
    multiplier: str = "mammen"
    sigma: object = "median"
    keep_outcomes: bool = False

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be at least 1")
        if any(not 0 < a < 1 for a in self.levels):
            raise ValueError("levels must lie in (0, 1)")
        bad = [t for t in self.tests if t not in TESTS]
        if bad:
            raise ValueError(f"unknown tests {bad}; choose from {TESTS}")
        if self.estimator not in ("ols", "lasso"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass
class McReport:
    rows: list
    config: dict
    failures: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)

    def rate(self, test, dgp, level, mode="bootstrap", q=None, n=None):
        for r in self.rows:
            if (r["test"] == test and r["dgp"] == str(dgp) and r["mode"] == mode
                    and abs(r["level"] - level) < 1e-12
                    and (q is None or r["q"] == q) and (n is None or r["n"] == n)):
                return r["rate"]
        raise KeyError((test, dgp, level, mode, q, n))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: r[k] for k in CSV_COLUMNS})
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"config": self.config, "rows": self.rows, "failures": self.failures},
                          indent=2, default=str)


CSV_COLUMNS = ["test", "dgp", "q", "n", "estimator", "level", "mode", "rate", "mc_se", "reps",
               "seconds"]


def cell_key(test, spec, estimator):
    return f"{test}|{spec.id}|{spec.q}|{spec.n}|{spec.c}|{estimator}"


def replication_seed(base_seed, key, rep):
    """Seed sequence for one replication, independent of scheduling."""
    return np.random.SeedSequence(entropy=int(base_seed), spawn_key=(zlib.crc32(key.encode()), rep))


def run_replication(test, spec, mc, rep):
    """One replication; returns a dict of rejection flags and statistics."""
    key = cell_key(test, spec, mc.estimator)
    ss = replication_seed(mc.base_seed, key, rep)
    data_ss, split_ss, boot_ss = ss.spawn(3)
    data = gen_dgp(spec, np.random.default_rng(data_ss))
    split_seed = int(split_ss.generate_state(1)[0])
    boot = BootstrapConfig(mc.B, mc.multiplier, int(boot_ss.generate_state(1)[0]), tuple(mc.levels))
    t0 = time.perf_counter()
    if test in VARIANTS:
        res = run_test(data, test, mc.estimator, mc.sigma, SvmConfig(nu=mc.nu), boot,
                       SplitPlan(mc.train_fraction, split_seed))
        out = {"bootstrap": [bool(res.reject(a)) for a in mc.levels],
               "analytic": [bool(res.reject(a, "analytic")) for a in mc.levels],
               "chi_sq": res.chi_sq, "p_analytic": res.p_analytic,
               "p_bootstrap": res.p_bootstrap, "stat": res.boot_stat}
    else:
        sigma = None if mc.sigma == "median" else mc.sigma
        res = run_baseline(data, test, mc.estimator, boot, sigma)
        out = {"bootstrap": [bool(res.reject(a)) for a in mc.levels],
               "p_bootstrap": res.p_bootstrap, "stat": res.stat}
    out["seconds"] = time.perf_counter() - t0
    return out


def _run_chunk(test, spec, mc, reps):
    results = []
    for rep in reps:
        try:
            results.append(run_replication(test, spec, mc, rep))
        except (SpecTestError, ValueError, np.linalg.LinAlgError) as exc:
            results.append({"error": f"{type(exc).__name__}: {exc}"})
    return results


def run_mc(mc, dgps):
    """Rejection rates for every (test, DGP) cell at every level.

    Replication ``r`` of a cell always uses the same random stream, so the
    report does not depend on ``workers``.
    """
    dgps = [d if isinstance(d, DgpSpec) else DgpSpec(**d) for d in dgps]
    jobs = []
    for test in mc.tests:
        for spec in dgps:
            chunks = np.array_split(np.arange(mc.R), max(1, min(mc.R, 4 * mc.workers)))
            jobs.extend((test, spec, [int(r) for r in ch]) for ch in chunks if len(ch))
    if mc.workers > 1:
        parts = Parallel(n_jobs=mc.workers)(delayed(_run_chunk)(t, s, mc, r) for t, s, r in jobs)
    else:
        parts = [_run_chunk(t, s, mc, r) for t, s, r in jobs]

    by_cell = {}
    for (test, spec, _), part in zip(jobs, parts):
        by_cell.setdefault((test, spec), []).extend(part)

    rows, failures, outcomes = [], {}, {}
    for (test, spec), res in by_cell.items():
        ok = [r for r in res if "error" not in r]
        errs = [r["error"] for r in res if "error" in r]
        key = cell_key(test, spec, mc.estimator)
        if errs:
            failures[key] = {"count": len(errs), "flagged": len(errs) > 0.01 * mc.R,
                             "first": errs[0]}
        if mc.keep_outcomes:
            outcomes[key] = ok
        seconds = float(sum(r["seconds"] for r in ok))
        modes = ["bootstrap", "analytic"] if test in VARIANTS else ["bootstrap"]
        for li, level in enumerate(mc.levels):
            for mode in modes:
                reps = len(ok)
                rate = float(np.mean([r[mode][li] for r in ok])) if reps else float("nan")
                se = float(np.sqrt(rate * (1 - rate) / reps)) if reps else float("nan")
                rows.append({"test": test, "dgp": spec.id, "q": spec.q, "n": spec.n,
                             "estimator": mc.estimator, "level": float(level), "mode": mode,
                             "rate": rate, "mc_se": se, "reps": reps,
                             "seconds": round(seconds, 4)})
    return McReport(rows, asdict(mc), failures, outcomes)


def table1_cells(q=10, n_grid=(200, 400)):
    """DGPs 1-5 crossed with ``n_grid``, the layout of the OLS size/power tables."""
    return [DgpSpec(str(i), q, n) for n in n_grid for i in range(1, 6)]


def _bootstrap_timer(test, data, B, seed):
    """Seconds spent in the bootstrap stage of one test on ``data``."""
    cfg = BootstrapConfig(B=B, seed=seed)
    if test in VARIANTS:
        train, test_split = split(data, SplitPlan(0.1, seed))
        model = fit_ols(train)
        kspec = resolve_kernel("median", train.X)
        direction = learn_direction(train, model, kspec, test, SvmConfig())
        tb = residuals(model, test_split)
        P = build_projector(tb.G)
        K = gram(test_split.X, direction.support_points, kspec)
        t0 = time.perf_counter()
        bootstrap_distribution(tb.residuals, P, K, direction.weights, cfg)
        return time.perf_counter() - t0
    model = fit_ols(data)
    rb = residuals(model, data)
    kspec = resolve_kernel(2.0 if test == "icm" else "median", data.X)
    K = gram(data.X, data.X, kspec)
    P = build_projector(rb.G)
    t0 = time.perf_counter()
    V = draw_multipliers(data.n, cfg.multiplier, np.random.default_rng(seed), size=B)
    E = rb.residuals[None, :] * V
    if test == "icm":
        D = data.design()
        Ystar = rb.fitted[None, :] + E
        theta, *_ = np.linalg.lstsq(D, Ystar.T, rcond=None)
        E = Ystar - (D @ theta).T
    elif test == "gp":
        E = project_rows(P, E)
    v_statistics_rows(E, K)
    return time.perf_counter() - t0


def time_profile(tests=("nusvm", "ocsvm", "kcm"), n_grid=(200, 400, 800), reps=5, q=10, B=500,
                 seed=0, stage="bootstrap"):
    """Wall-clock per test over ``n_grid`` with a fitted log-log scaling exponent.

    Each grid point reports the fastest of ``reps`` runs, which is the least
    noisy estimate of the work done.
    ``stage='bootstrap'`` times only the resampling step (the part whose cost
    differs between the SVM tests and the V-statistic tests); ``'total'``
    times whole test runs.
    """
    rows, exponents = [], {}
    for test in tests:
        if test not in TESTS:
            raise ValueError(f"unknown test {test!r}")
        secs = []
        for n in n_grid:
            times = []
            for r in range(reps):
                data = gen_dgp(DgpSpec("2", q, n, seed=seed + r))
                if stage == "bootstrap":
                    times.append(_bootstrap_timer(test, data, B, seed + r))
                else:
                    boot = BootstrapConfig(B=B, seed=seed + r)
                    t0 = time.perf_counter()
                    if test in VARIANTS:
                        run_test(data, test, boot_cfg=boot, plan=SplitPlan(0.1, seed + r))
                    else:
                        run_baseline(data, test, boot_cfg=boot)
                    times.append(time.perf_counter() - t0)
            t = float(np.min(times))
            secs.append(t)
            rows.append({"test": test, "n": n, "seconds": t, "reps": reps})
        slope = float(np.polyfit(np.log(n_grid), np.log(secs), 1)[0])
        exponents[test] = slope
    for r in rows:
        r["exponent"] = exponents[r["test"]]
    return rows, exponents
