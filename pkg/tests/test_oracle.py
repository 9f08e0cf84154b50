import numpy as np
import pytest

from medagg.data import PenaltyConfig
from medagg.errors import DegenerateTau, NonFiniteEvaluation, RankOneViolation
from medagg.oracle import (
    finite_diff_grad,
    grid_search_min,
    identify_from_moments,
    rank_one_moments,
    ssr_hessian,
    ssr_objective_value,
)
from medagg.profiling import SufficientStats, smooth_gradient
from medagg.solver import SolverOptions, fit

from conftest import make_dataset


def _align_error(u, v):
    u = np.asarray(u, float); v = np.asarray(v, float)
    u = u / np.linalg.norm(u); v = v / np.linalg.norm(v)
    return min(np.linalg.norm(u - v), np.linalg.norm(u + v))


# ---- finite differences ----

def test_fd_grad_quadratic():
    g = finite_diff_grad(lambda x: 0.5 * float(x @ x), np.array([1.0, 2.0]), 1e-5)
    np.testing.assert_allclose(g, [1.0, 2.0], atol=1e-8)


def test_fd_grad_linear_exact():
    c = np.array([3.0, -2.0, 0.5])
    g = finite_diff_grad(lambda x: float(c @ x), np.zeros(3), 0.37)
    np.testing.assert_allclose(g, c, atol=1e-12)


def test_fd_grad_nonfinite():
    with pytest.raises(NonFiniteEvaluation):
        finite_diff_grad(lambda x: float("nan"), np.zeros(2), 1e-4)


def test_analytic_gradient_matches_fd():
    d = make_dataset(n=80, m=3, q=3, seed=6)
    stats = SufficientStats(d)
    rng = np.random.default_rng(0)
    for _ in range(5):
        a = rng.normal(size=3); b = rng.normal(size=3)
        ga, gb = smooth_gradient(stats, a, b, 0.0)
        x0 = np.concatenate([a, b])
        g_fd = finite_diff_grad(
            lambda x: ssr_objective_value(stats, x[:3], x[3:]), x0, 1e-6
        )
        assert np.abs(np.concatenate([ga, gb]) - g_fd).max() < 1e-6


def test_analytic_hessian_matches_fd():
    d = make_dataset(n=80, m=3, q=3, seed=7)
    stats = SufficientStats(d)
    rng = np.random.default_rng(1)
    a = rng.normal(size=3); b = rng.normal(size=3)
    H = ssr_hessian(stats, a, b)
    x0 = np.concatenate([a, b])
    h = 1e-4

    def f(x):
        return ssr_objective_value(stats, x[:3], x[3:])

    Hfd = np.empty((6, 6))
    f0 = f(x0)
    for i in range(6):
        ei = np.zeros(6); ei[i] = h
        Hfd[i, i] = (f(x0 + ei) - 2 * f0 + f(x0 - ei)) / h**2
        for j in range(i + 1, 6):
            ej = np.zeros(6); ej[j] = h
            Hfd[i, j] = Hfd[j, i] = (
                f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)
            ) / (4 * h**2)
    assert np.abs(H - Hfd).max() / np.abs(H).max() < 1e-4


# ---- grid search ----

def test_grid_search_consistent_with_resolution(tiny_dataset):
    p = PenaltyConfig(0.1, 0.1, 0.02)
    _, obj1 = grid_search_min(tiny_dataset, p, resolution=360)
    _, obj2 = grid_search_min(tiny_dataset, p, resolution=720)
    assert obj2 <= obj1 + 1e-12
    assert obj1 - obj2 < 1e-4


def test_grid_search_argmin_matches_objective(tiny_dataset):
    from medagg.profiling import objective_value
    p = PenaltyConfig(0.1, 0.1, 0.02)
    w, obj = grid_search_min(tiny_dataset, p, resolution=360)
    bd = objective_value(tiny_dataset, w, p)
    assert bd.total == pytest.approx(obj, rel=1e-9)


def test_grid_search_m1_q1():
    d = make_dataset(n=40, m=1, q=1, seed=8)
    p = PenaltyConfig(0.05, 0.05, 0.0)
    w, obj = grid_search_min(d, p, resolution=8)
    assert np.isfinite(obj)
    assert w.a.shape == (1,) and w.b.shape == (1,)


def test_solver_reaches_grid_minimum_on_benign_instances():
    hits = 0
    total = 0
    for seed in range(8):
        d = make_dataset(n=50, m=2, q=2, seed=100 + seed, coupling=0.3)
        p = PenaltyConfig(0.1, 0.1, 0.02)
        try:
            _, oracle_obj = grid_search_min(d, p, resolution=360)
        except Exception:
            continue
        total += 1
        res = fit(d, p, SolverOptions(restarts=10, seed=seed))
        if res.objective <= oracle_obj + 1e-3:
            hits += 1
    assert total >= 6
    assert hits / total >= 0.7


# ---- identification ----

def _random_rank_one_model(rng, m=4, q=5, alpha_floor=0.3):
    L = rng.normal(size=(m, m))
    sxx = L @ L.T + m * np.eye(m)
    a0 = rng.normal(size=m)
    b0 = rng.normal(size=q)
    Le = rng.normal(size=(q, q))
    se = Le @ Le.T + q * np.eye(q)
    alpha0 = rng.uniform(alpha_floor, 1.5) * rng.choice([-1.0, 1.0])
    gamma0 = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
    eta0 = rng.uniform(0.2, 1.0) * rng.choice([-1.0, 1.0])
    if abs(gamma0 + alpha0 * eta0) < 0.05:
        gamma0 += 0.3
    return sxx, a0, b0, alpha0, gamma0, eta0, se


def test_identification_round_trip_analytic():
    rng = np.random.default_rng(12)
    for _ in range(100):
        sxx, a0, b0, alpha0, gamma0, eta0, se = _random_rank_one_model(rng)
        sxm, sxy, smy, smm = rank_one_moments(sxx, a0, b0, alpha0, gamma0, eta0, se)
        ident = identify_from_moments(sxm, sxy, smy, sxx, smm)
        assert _align_error(ident.a_dir, a0) < 1e-8
        assert _align_error(ident.b_dir, b0) < 1e-8
        tau0 = gamma0 + alpha0 * eta0
        assert ident.tau_norm_a == pytest.approx(abs(tau0) * np.linalg.norm(a0), rel=1e-8)
        assert abs(ident.eta_norm_b) == pytest.approx(abs(eta0) * np.linalg.norm(b0), rel=1e-8)


def test_identification_alpha_zero_branch():
    rng = np.random.default_rng(13)
    sxx, a0, b0, _, gamma0, eta0, se = _random_rank_one_model(rng)
    sxm, sxy, smy, smm = rank_one_moments(sxx, a0, b0, 0.0, gamma0, eta0, se)
    assert np.abs(sxm).max() < 1e-12
    ident = identify_from_moments(sxm, sxy, smy, sxx, smm)
    assert ident.alpha_zero
    assert _align_error(ident.a_dir, a0) < 1e-10
    assert _align_error(ident.b_dir, b0) < 1e-10


def test_identification_rank_two_rejected():
    rng = np.random.default_rng(14)
    sxx, a0, b0, alpha0, gamma0, eta0, se = _random_rank_one_model(rng)
    sxm, sxy, smy, smm = rank_one_moments(sxx, a0, b0, alpha0, gamma0, eta0, se)
    sxm_bad = sxm + 0.3 * np.outer(rng.normal(size=sxm.shape[0]),
                                   rng.normal(size=sxm.shape[1]))
    with pytest.raises(RankOneViolation):
        identify_from_moments(sxm_bad, sxy, smy, sxx, smm)


def test_identification_degenerate_tau():
    rng = np.random.default_rng(15)
    sxx, a0, b0, _, _, eta0, se = _random_rank_one_model(rng)
    alpha0 = 0.8
    gamma0 = -alpha0 * eta0  # total effect exactly zero
    sxm, sxy, smy, smm = rank_one_moments(sxx, a0, b0, alpha0, gamma0, eta0, se)
    with pytest.raises(DegenerateTau):
        identify_from_moments(sxm, sxy, smy, sxx, smm)


def test_identification_from_sample_moments():
    rng = np.random.default_rng(16)
    sxx, a0, b0, alpha0, gamma0, eta0, se = _random_rank_one_model(rng, m=4, q=4)
    n = 100_000
    Lx = np.linalg.cholesky(sxx)
    Le = np.linalg.cholesky(se)
    X = rng.standard_normal((n, 4)) @ Lx.T
    A = (alpha0 / float(b0 @ b0)) * np.outer(b0, a0)
    M = X @ A.T + rng.standard_normal((n, 4)) @ Le.T
    Y = gamma0 * (X @ a0) + eta0 * (M @ b0) + rng.standard_normal(n)
    ident = identify_from_moments(
        X.T @ M / n, X.T @ Y / n, M.T @ Y / n, X.T @ X / n, M.T @ M / n,
        rank_tol=0.2,
    )
    ang_a = np.arccos(min(1.0, abs(ident.a_dir @ a0) / np.linalg.norm(a0)))
    ang_b = np.arccos(min(1.0, abs(ident.b_dir @ b0) / np.linalg.norm(b0)))
    assert ang_a <= 0.02 and ang_b <= 0.02
