"""Penalized smoothing: exact fused-lasso scan, iterative solver, CV.

Correctness evidence is layered: hand-solvable cases, the box-dual
reference from oracles.py, an exact stationarity certificate for the
order-1 scan, a duality-gap certificate for the iterative solver at any
order, and the contraction property of the dual-distance function along
the plain (fixed-penalty, unrelaxed) iteration.  The raw objective value
is deliberately not asserted to fall at every step: measured runs show
occasional small increases, while the dual distance decreases throughout.
"""

import warnings

import numpy as np
import pytest

from cdfreg.core import Sample, difference, indicators, make_grid
from cdfreg.trendfilter import (TrendFilterConfig, _admm_matrix, _banded_factor,
                                cv_select_lambda, fit_trendfilter, fused_lasso,
                                penalized_objective, predict_linear,
                                trendfilter_admm)
from oracles import fused_lasso_oracle
from scipy.linalg import cho_solve_banded


def _diff_adjoint_ref(u, order):
    """Hand-rolled adjoint of the order-fold difference (test-local)."""
    u = np.asarray(u, dtype=float)
    for _ in range(order):
        out = np.zeros(u.size + 1)
        out[:-1] -= u
        out[1:] += u
        u = out
    return u


def test_fused_lasso_hand_examples():
    np.testing.assert_allclose(fused_lasso(np.array([0.0, 1.0]), 0.25),
                               [0.25, 0.75], atol=1e-12)
    np.testing.assert_allclose(fused_lasso(np.array([0.0, 1.0]), 0.5),
                               [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(fused_lasso(np.array([1.0, 3.0, 2.0]), 0.5),
                               [1.5, 2.25, 2.25], atol=1e-12)


def test_fused_lasso_limits_and_validation():
    rng = np.random.default_rng(8)
    v = rng.normal(size=25)
    np.testing.assert_array_equal(fused_lasso(v, 0.0), v)
    big = fused_lasso(v, 1e6)
    np.testing.assert_allclose(big, np.full(25, v.mean()), atol=1e-9)
    with pytest.raises(ValueError):
        fused_lasso(np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        fused_lasso(np.array([1.0, np.nan]), 1.0)
    with pytest.raises(ValueError):
        fused_lasso(v, -0.1)


def test_fused_lasso_stationarity_certificate():
    # c = cumsum(theta - v) must stay inside [-lam, lam], close at zero,
    # and touch the right wall at every jump of the solution
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(2, 61))
        v = rng.normal(size=n) * rng.uniform(0.5, 3.0)
        lam = float(rng.uniform(0.05, 3.0))
        theta = fused_lasso(v, lam)
        c = np.cumsum(theta - v)
        assert np.max(np.abs(c)) <= lam + 1e-9
        assert abs(c[-1]) <= 1e-9
        jumps = np.diff(theta)
        up = np.flatnonzero(jumps > 1e-10)
        dn = np.flatnonzero(jumps < -1e-10)
        assert np.all(np.abs(c[up] - lam) <= 1e-8)
        assert np.all(np.abs(c[dn] + lam) <= 1e-8)


def test_fused_lasso_matches_box_dual_oracle():
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(2, 51))
        v = rng.uniform(-2.0, 2.0, size=n)
        lam = float(rng.uniform(0.01, 2.0))
        gap = np.max(np.abs(fused_lasso(v, lam) - fused_lasso_oracle(v, lam)))
        assert gap < 1e-6


def test_fused_lasso_is_nonexpansive_and_mean_preserving():
    rng = np.random.default_rng(9)
    for _ in range(25):
        n = int(rng.integers(2, 50))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        lam = float(rng.uniform(0.05, 2.0))
        fa, fb = fused_lasso(a, lam), fused_lasso(b, lam)
        assert np.linalg.norm(fa - fb) <= np.linalg.norm(a - b) + 1e-12
        assert abs(fa.sum() - a.sum()) < 1e-9


def test_banded_factor_solves_the_ridge_system():
    rng = np.random.default_rng(10)
    for order in (1, 2, 3):
        n = 30
        rho = 1.7
        factor = _banded_factor(n, order, rho)
        d = np.eye(n)
        for _ in range(order):
            d = np.diff(d, axis=0)
        full = np.eye(n) + rho * d.T @ d
        rhs = rng.normal(size=n)
        x = cho_solve_banded((factor, False), rhs)
        np.testing.assert_allclose(full @ x, rhs, atol=1e-10)


def _duality_gap(v, theta, u, lam, order, rho):
    """f(theta) - g(mu) with mu the clipped scaled dual from the solver."""
    mu = np.clip(rho * u, -lam, lam)
    primal = penalized_objective(v, theta, lam, order)
    dual = mu @ difference(v, order) - 0.5 * np.sum(_diff_adjoint_ref(mu, order) ** 2)
    return primal - dual


def test_admm_order1_matches_exact_scan():
    rng = np.random.default_rng(11)
    cfg = TrendFilterConfig(order=1, tol_primal=1e-6, tol_dual=1e-6,
                            max_iter=20000)
    for _ in range(10):
        n = int(rng.integers(5, 80))
        v = np.cumsum(rng.normal(size=n))
        lam = float(rng.uniform(0.1, 2.0))
        res = trendfilter_admm(v, lam, config=cfg)
        assert res.converged
        assert np.max(np.abs(res.theta - fused_lasso(v, lam))) < 1e-4


def test_admm_duality_gap_certificate():
    # fixed penalty so the returned scaled dual is on a known scale
    rng = np.random.default_rng(12)
    for order in (1, 2, 3):
        cfg = TrendFilterConfig(order=order, tol_primal=1e-6, tol_dual=1e-6,
                                max_iter=50000, adapt_rho=False)
        for _ in range(5):
            n = int(rng.integers(order + 4, 70))
            v = np.cumsum(rng.normal(size=n)) / 2.0
            lam = float(rng.uniform(0.1, 1.5))
            theta, z, u, iters, converged, rp, rd = _admm_matrix(
                v[:, None], lam, order, cfg)
            assert converged
            scale = penalized_objective(v, np.full(n, v.mean()), lam, order)
            gap = _duality_gap(v, theta[:, 0], u[:, 0], lam, order, cfg.rho)
            assert -1e-9 <= gap < 1e-4 * max(scale, 1.0)


def test_admm_dual_distance_contracts_along_plain_iteration():
    # with a fixed penalty and no over-relaxation, the squared distance of
    # (z, u) to the optimum never grows from one iteration to the next
    rng = np.random.default_rng(5)
    n = 40
    v = np.cumsum(rng.normal(size=n)) / 3.0
    rho = 1.0

    def plain(order, max_iter):
        return TrendFilterConfig(order=order, rho=rho, max_iter=max_iter,
                                 tol_primal=1e-300, tol_dual=1e-300,
                                 adapt_rho=False, relaxation=1.0)

    # order 1: optimum and its dual come from the exact scan
    lam = 0.8
    theta_star = fused_lasso(v, lam)
    u_star = np.cumsum(theta_star - v)[:-1] / rho
    z_star = difference(theta_star, 1)
    dists = []
    for k in range(1, 61):
        _, z, u, *_ = _admm_matrix(v[:, None], lam, 1, plain(1, k))
        dists.append(np.sum((u[:, 0] - u_star) ** 2) + np.sum((z[:, 0] - z_star) ** 2))
    assert np.all(np.diff(dists) <= 1e-12)

    # order 2: reference point from a long run of the same iteration
    lam2 = 0.5
    _, z_ref, u_ref, *_ = _admm_matrix(v[:, None], lam2, 2, plain(2, 200000))
    dists2 = []
    for k in range(1, 61):
        _, z, u, *_ = _admm_matrix(v[:, None], lam2, 2, plain(2, k))
        dists2.append(np.sum((u - u_ref) ** 2) + np.sum((z - z_ref) ** 2))
    assert np.all(np.diff(dists2) <= 1e-12)


def test_admm_warns_when_iteration_budget_too_small():
    rng = np.random.default_rng(14)
    v = np.cumsum(rng.normal(size=200))
    cfg = TrendFilterConfig(order=2, max_iter=3, tol_primal=1e-6, tol_dual=1e-6)
    with pytest.warns(UserWarning, match="max_iter"):
        res = trendfilter_admm(v, 1.0, config=cfg)
    assert not res.converged


def test_trendfilter_config_validation():
    with pytest.raises(ValueError):
        TrendFilterConfig(order=0)
    with pytest.raises(ValueError):
        TrendFilterConfig(lambda_grid=())
    with pytest.raises(ValueError):
        TrendFilterConfig(lambda_grid=(0.5, 0.5))
    with pytest.raises(ValueError):
        TrendFilterConfig(lambda_grid=(0.5, -1.0))
    with pytest.raises(ValueError):
        TrendFilterConfig(rho=0.0)
    with pytest.raises(ValueError):
        TrendFilterConfig(relaxation=2.5)
    with pytest.raises(ValueError):
        TrendFilterConfig(tol_primal=0.5)  # above the accepted ceiling
    with pytest.raises(ValueError):
        TrendFilterConfig(cv_folds=1)
    # the grid is normalized to ascending order
    cfg = TrendFilterConfig(lambda_grid=(2.0, 0.5, 1.0))
    assert cfg.lambda_grid == (0.5, 1.0, 2.0)


def test_cv_breaks_exact_ties_toward_larger_lambda():
    # two penalties far beyond the saturation point give identical constant
    # fits, hence identical CV errors; the larger one must win
    rng = np.random.default_rng(15)
    v = np.cumsum(rng.normal(size=40))[:, None]
    cfg = TrendFilterConfig(order=1, lambda_grid=(1e6, 2e6))
    with pytest.warns(UserWarning, match="boundary"):
        cv = cv_select_lambda(v, cfg)
    assert float(cv.lambda_chosen) == 2e6
    assert not cv.per_threshold
    assert cv.errors.shape == (2,)


def test_cv_warns_on_boundary_winner():
    rng = np.random.default_rng(16)
    v = np.cumsum(rng.normal(size=50))[:, None]
    # only tiny penalties: the smallest achievable CV error sits at an edge
    cfg = TrendFilterConfig(order=1, lambda_grid=(1e-7, 2e-7, 4e-7))
    with pytest.warns(UserWarning, match="boundary"):
        cv_select_lambda(v, cfg)


def test_cv_per_threshold_returns_one_lambda_per_column():
    rng = np.random.default_rng(17)
    y = rng.normal(size=60)
    ind = indicators(Sample(y), make_grid(-1.5, 1.5, 7))
    cfg = TrendFilterConfig(order=1, lambda_grid=(0.02, 0.1, 0.5, 2.0),
                            per_threshold=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        cv = cv_select_lambda(ind.w, cfg)
    assert cv.per_threshold
    assert cv.lambda_chosen.shape == (7,)
    assert cv.errors.shape == (4, 7)
    assert set(cv.lambda_chosen) <= set(cfg.lambda_grid)


def test_cv_needs_enough_rows():
    cfg = TrendFilterConfig(order=1, cv_folds=5)
    with pytest.raises(ValueError):
        cv_select_lambda(np.zeros((8, 1)), cfg)


def test_fit_trendfilter_fixed_lambda_and_interpolation():
    y = np.array([0.1, 0.2, 0.3, 0.4])
    ind = indicators(Sample(y), make_grid(0.0, 0.5, 5))
    cfg = TrendFilterConfig(order=1)
    fit = fit_trendfilter(ind, cfg, train_index=np.array([0.0, 2.0, 4.0, 6.0]),
                          lam=0.05)
    assert fit.cv is None
    assert float(fit.lambda_chosen) == 0.05
    assert fit.estimate.raw
    fitted = fit.estimate.values
    pred = predict_linear(fit, np.array([1.0, -3.0, 99.0]))
    np.testing.assert_allclose(pred.values[0], 0.5 * (fitted[0] + fitted[1]),
                               atol=1e-12)
    np.testing.assert_array_equal(pred.values[1], fitted[0])  # clamp low
    np.testing.assert_array_equal(pred.values[2], fitted[3])  # clamp high


def test_fit_trendfilter_shared_lambda_keeps_rows_monotone():
    # nested indicator columns solved at one shared penalty stay nested,
    # because the proximity operator is an isotone map
    rng = np.random.default_rng(18)
    y = rng.normal(size=70)
    ind = indicators(Sample(y), make_grid(-1.5, 1.5, 12))
    cfg = TrendFilterConfig(order=1, lambda_grid=(0.05, 0.2, 0.8))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        fit = fit_trendfilter(ind, cfg)
    assert np.all(np.diff(fit.estimate.values, axis=1) >= -1e-9)
