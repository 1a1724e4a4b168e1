import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import dense_projector, mean_projection_loop
from spectest.errors import DegenerateDataError
from spectest.kernel import gram
from spectest.model import Dataset, fit_ols, residuals
from spectest.projection import build_projector, project, project_kernel_columns
from spectest.simulation import DgpSpec, gen_dgp
from spectest.svm import SvmConfig
from spectest.testing import (MAMMEN_HIGH, MAMMEN_LOW, MAMMEN_P_LOW, BootstrapConfig, SplitPlan,
                              bootstrap_distribution, bootstrap_inference, draw_multipliers,
                              learn_direction, mean_projection, resolve_kernel, run_test, split,
                              t_statistic, t_statistic_from_scores)

JSON_KEYS = {"t_stat", "chi_sq", "p_analytic", "p_bootstrap", "boot_crit", "n_test",
             "support_size", "variant", "estimator", "sigma", "nu", "seed"}


def test_config_validation():
    with pytest.raises(ValueError):
        SplitPlan(1.0)
    with pytest.raises(ValueError):
        BootstrapConfig(B=0)
    with pytest.raises(ValueError):
        BootstrapConfig(multiplier="bernoulli")
    with pytest.raises(ValueError):
        BootstrapConfig(levels=(0.05, 1.2))


def test_split_too_small():
    d = Dataset(np.arange(10.0), np.arange(10.0))
    with pytest.raises(DegenerateDataError):
        split(d, SplitPlan(0.1))


def test_split_deterministic_and_exhaustive(rng):
    d = Dataset(rng.normal(size=(100, 2)), np.arange(100.0))
    tr1, te1 = split(d, SplitPlan(0.1, seed=4))
    tr2, te2 = split(d, SplitPlan(0.1, seed=4))
    np.testing.assert_array_equal(tr1.y, tr2.y)
    np.testing.assert_array_equal(te1.y, te2.y)
    assert sorted(np.concatenate([tr1.y, te1.y])) == list(range(100))
    other, _ = split(d, SplitPlan(0.1, seed=5))
    assert not np.array_equal(other.y, tr1.y)


def test_split_sizes(rng):
    d = Dataset(rng.normal(size=(1000, 3)), rng.normal(size=1000))
    tr, te = split(d, SplitPlan(0.6))
    assert (tr.n, te.n) == (600, 400)


def test_mean_projection_examples(rng):
    assert mean_projection(np.zeros(4), rng.uniform(size=(4, 2)), [1.0, -2.0]) == 0.0
    assert mean_projection([1.0, -1.0, 2.0], np.ones((3, 1)), [1.0]) == pytest.approx(2 / 3)
    eps, K, eta = rng.normal(size=9), rng.uniform(size=(9, 4)), rng.normal(size=4)
    assert mean_projection(eps, K, eta) == pytest.approx(
        mean_projection_loop(eps.tolist(), K.tolist(), eta.tolist()), abs=1e-12)


def test_mean_projection_shape_errors():
    with pytest.raises(ValueError):
        mean_projection(np.ones(3), np.ones((3, 2)), [1.0])
    with pytest.raises(ValueError):
        mean_projection(np.ones(4), np.ones((3, 1)), [1.0])


def test_t_statistic_hand_example():
    ts = t_statistic([1.0, -1.0, 2.0], np.ones((3, 1)), [1.0])
    assert ts.mu_hat == pytest.approx(2 / 3)
    assert ts.sigma_hat ** 2 == pytest.approx(7 / 3)
    assert ts.t_stat == pytest.approx(0.43644, abs=1e-5)
    assert ts.chi_sq == pytest.approx(0.57143, abs=1e-5)
    assert ts.p_analytic == pytest.approx(stats.chi2.sf(4 / 7, 1))


def test_t_statistic_five_percent_point():
    # two scores a +/- 1 give chi_sq = a^2
    a = np.sqrt(3.8415)
    ts = t_statistic_from_scores([a + 1, a - 1])
    assert ts.chi_sq == pytest.approx(3.8415)
    assert ts.p_analytic == pytest.approx(0.0500, abs=1e-4)


def test_t_statistic_zero_variance():
    with pytest.raises(DegenerateDataError):
        t_statistic_from_scores([0.3, 0.3, 0.3])
    with pytest.raises(DegenerateDataError):
        t_statistic_from_scores([1.0])


def test_mammen_moments():
    b = MAMMEN_P_LOW
    assert b == pytest.approx(0.72361, abs=1e-5)
    assert MAMMEN_LOW == pytest.approx(-0.6180, abs=1e-4)
    assert MAMMEN_HIGH == pytest.approx(1.6180, abs=1e-4)
    assert b * MAMMEN_LOW + (1 - b) * MAMMEN_HIGH == pytest.approx(0.0, abs=1e-15)
    assert b * MAMMEN_LOW**2 + (1 - b) * MAMMEN_HIGH**2 == pytest.approx(1.0, abs=1e-15)
    v = draw_multipliers(100_000, "mammen", np.random.default_rng(0))
    assert set(np.unique(v)) == {MAMMEN_LOW, MAMMEN_HIGH}
    assert np.mean(v == MAMMEN_LOW) == pytest.approx(b, abs=0.01)


def test_rademacher_moments():
    v = draw_multipliers(100_000, "rademacher", np.random.default_rng(1))
    assert set(np.unique(v)) == {-1.0, 1.0}
    assert abs(v.mean()) <= 0.02
    assert abs(v.var() - 1) <= 0.02


def test_normal_multipliers_ks():
    v = draw_multipliers(10_000, "normal", np.random.default_rng(2))
    assert stats.kstest(v, "norm").pvalue > 0.01


def test_multiplier_shapes_and_errors():
    assert draw_multipliers(7, size=3).shape == (3, 7)
    with pytest.raises(ValueError):
        draw_multipliers(5, "uniform")


def _fixture_problem(seed, n=60):
    rng = np.random.default_rng(seed)
    G = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    eps = rng.normal(size=n)
    K = rng.uniform(size=(n, 5))
    eta = rng.normal(size=5)
    return build_projector(G), eps, K, eta


def test_bootstrap_zero_weights():
    P, eps, K, _ = _fixture_problem(0)
    draws = bootstrap_distribution(eps, P, K, np.zeros(5), BootstrapConfig(B=50))
    np.testing.assert_array_equal(draws, 0.0)


def test_bootstrap_identity_multiplier():
    P, eps, K, eta = _fixture_problem(1)
    n = eps.size
    draws = bootstrap_distribution(eps, P, K, eta, BootstrapConfig(B=1), multipliers=np.ones((1, n)))
    expected = np.sqrt(n) * mean_projection(project(P, eps), K, eta)
    assert draws[0] == pytest.approx(expected, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_bootstrap_matches_explicit_projection(seed):
    # every draw: multiply, project with the dense matrix, take sqrt(n) times the mean
    P, eps, K, eta = _fixture_problem(seed, n=30)
    V = draw_multipliers(30, "mammen", np.random.default_rng(seed), size=20)
    Pi = dense_projector(P.G)
    expected = [np.sqrt(30) * mean_projection(Pi @ (eps * v), K, eta) for v in V]
    got = bootstrap_distribution(eps, P, K, eta, BootstrapConfig(B=20), multipliers=V)
    np.testing.assert_allclose(got, expected, atol=1e-10)


def test_bootstrap_seeded():
    P, eps, K, eta = _fixture_problem(2)
    cfg = BootstrapConfig(B=30, seed=9)
    np.testing.assert_array_equal(bootstrap_distribution(eps, P, K, eta, cfg),
                                  bootstrap_distribution(eps, P, K, eta, cfg))


def test_bootstrap_inference_two_sided():
    draws = np.array([-3.0, -1.0, 0.5, 2.0])
    p, crit = bootstrap_inference(-2.0, draws, (0.5,))
    assert p == pytest.approx((1 + 2) / 5)
    assert crit[0.5] == pytest.approx(np.quantile([3, 1, 0.5, 2], 0.5))


def test_exact_linear_response_is_degenerate(rng):
    X = rng.normal(size=(80, 3))
    with pytest.raises(DegenerateDataError) as info:
        run_test(Dataset(X, X @ [1.0, 2.0, 3.0]), plan=SplitPlan(0.5))
    assert info.value.stage == "statistic"
    assert str(info.value).startswith("[statistic]")


def test_split_errors_are_annotated(rng):
    d = Dataset(rng.normal(size=(10, 3)), rng.normal(size=10))
    with pytest.raises(DegenerateDataError, match=r"^\[split\]"):
        run_test(d, plan=SplitPlan(0.1))


@pytest.mark.parametrize("variant", ["nusvm", "ocsvm"])
@pytest.mark.parametrize("estimator", ["ols", "lasso"])
def test_run_test_result(variant, estimator):
    data = gen_dgp(DgpSpec("2", q=10, n=300, seed=3))
    res = run_test(data, variant, estimator, boot_cfg=BootstrapConfig(B=199, seed=1),
                   plan=SplitPlan(0.2, seed=2))
    d = res.to_dict()
    assert set(d) == JSON_KEYS
    json.dumps(d)
    assert 0 <= res.p_analytic <= 1 and 0 < res.p_bootstrap <= 1
    assert res.chi_sq >= 0 and res.sigma_hat > 0
    assert res.n_test == 240 and res.support_size >= 1
    assert res.chi_sq == pytest.approx(res.n_test * res.t_stat**2)
    assert set(res.boot_crit) == {0.10, 0.05, 0.01}
    assert res.boot_crit[0.01] >= res.boot_crit[0.05] >= res.boot_crit[0.10]
    assert res.reject(0.05) == (abs(res.boot_stat) > res.boot_crit[0.05])
    assert res.reject(0.05, "analytic") == (res.p_analytic <= 0.05)
    with pytest.raises(KeyError):
        res.reject(0.2)
    again = run_test(data, variant, estimator, boot_cfg=BootstrapConfig(B=199, seed=1),
                     plan=SplitPlan(0.2, seed=2))
    assert json.dumps(again.to_dict()) == json.dumps(d)


def test_run_test_intercept_model():
    data = gen_dgp(DgpSpec("2*", q=6, n=300, seed=0))
    res = run_test(data, "ocsvm", boot_cfg=BootstrapConfig(B=99), plan=SplitPlan(0.2))
    assert np.isfinite(res.chi_sq)


def test_run_test_without_bootstrap_and_raw_mode():
    data = gen_dgp(DgpSpec("1", q=10, n=200, seed=0))
    res = run_test(data, boot_cfg=None, plan=SplitPlan(0.2))
    assert res.p_bootstrap is None and res.boot_crit == {}
    raw = run_test(data, boot_cfg=BootstrapConfig(B=99), plan=SplitPlan(0.2),
                   boot_residuals="raw")
    assert raw.t_stat == res.t_stat
    with pytest.raises(ValueError):
        run_test(data, boot_residuals="half")
    with pytest.raises(ValueError):
        run_test(data, variant="svr")


def test_fixed_bandwidth():
    data = gen_dgp(DgpSpec("1", q=10, n=200, seed=0))
    assert run_test(data, sigma=3.0, boot_cfg=None).sigma == 3.0


def _pipeline_pieces(seed=0, variant="nusvm"):
    data = gen_dgp(DgpSpec("3", q=10, n=400, seed=seed))
    train, test = split(data, SplitPlan(0.25, seed))
    model = fit_ols(train)
    kspec = resolve_kernel("median", train.X)
    direction = learn_direction(train, model, kspec, variant, SvmConfig())
    tb = residuals(model, test)
    P = build_projector(tb.G)
    K = gram(test.X, direction.support_points, kspec)
    return test, model, tb, P, K, direction


@pytest.mark.parametrize("variant", ["nusvm", "ocsvm"])
def test_projection_path_equivalence(variant):
    test, _, tb, P, K, direction = _pipeline_pieces(variant=variant)
    via_resid = mean_projection(project(P, tb.residuals), K, direction.weights)
    via_kernel = float(tb.residuals @ (project_kernel_columns(P, K) @ direction.weights)) / test.n
    assert via_resid == pytest.approx(via_kernel, abs=1e-10)


def test_estimation_effect_removed():
    # moving theta by O(n^-1/2) leaves the projected statistic unchanged; the raw one moves
    test, model, tb, P, K, direction = _pipeline_pieces(1)
    n = test.n
    rng = np.random.default_rng(0)
    w = K @ direction.weights
    w /= np.abs(w).max()  # the statistic is scale free; keep the raw shift measurable
    base = np.sqrt(n) * np.mean(project(P, tb.residuals) * w)
    base_raw = np.sqrt(n) * np.mean(tb.residuals * w)
    proj_moves, raw_moves = [], []
    for _ in range(20):
        delta = rng.normal(size=model.theta_hat.size)
        delta *= 1 / (np.sqrt(n) * np.linalg.norm(delta))
        eps = tb.residuals - test.X @ delta
        proj_moves.append(np.sqrt(n) * np.mean(project(P, eps) * w) - base)
        raw_moves.append(np.sqrt(n) * np.mean(eps * w) - base_raw)
    assert np.max(np.abs(proj_moves)) < 1e-10
    assert np.max(np.abs(raw_moves)) > 1e-3


def test_bootstrap_p_values_uniform_under_null():
    p = []
    for seed in range(500):
        data = gen_dgp(DgpSpec("1", q=10, n=400, seed=seed))
        res = run_test(data, "ocsvm", boot_cfg=BootstrapConfig(B=500, seed=seed),
                       plan=SplitPlan(0.1, seed))
        p.append(res.p_bootstrap)
    assert stats.kstest(p, "uniform").pvalue > 0.01
