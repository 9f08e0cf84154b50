import numpy as np
import pytest

from medagg.errors import DegenerateRegime, InvalidRho, NotPositiveDefinite
from medagg.simulation import (
    Misspecify,
    Regime,
    SimConfig,
    compound_symmetry_cov,
    generate_dataset,
    population_mp,
    sample_mvn,
)


def test_compound_symmetry_identity():
    np.testing.assert_array_equal(compound_symmetry_cov(4, 0.0), np.eye(4))


def test_compound_symmetry_example():
    np.testing.assert_allclose(compound_symmetry_cov(2, 0.3),
                               [[1.0, 0.3], [0.3, 1.0]])


def test_compound_symmetry_eigenvalues():
    dim, rho = 7, 0.4
    vals = np.linalg.eigvalsh(compound_symmetry_cov(dim, rho))
    np.testing.assert_allclose(sorted(vals)[-1], 1 + (dim - 1) * rho, rtol=1e-12)
    np.testing.assert_allclose(vals[:-1], [1 - rho] * (dim - 1), rtol=1e-12)


def test_compound_symmetry_invalid_rho():
    with pytest.raises(InvalidRho):
        compound_symmetry_cov(3, 1.0)


def test_sample_mvn_moments():
    cov = np.eye(4)
    draws = sample_mvn(np.zeros(4), cov, 100_000, seed=0)
    emp = np.cov(draws.T)
    assert np.abs(emp - cov).max() < 0.05
    assert np.abs(draws.mean(axis=0)).max() < 0.02


def test_sample_mvn_determinism():
    cov = compound_symmetry_cov(3, 0.5)
    d1 = sample_mvn(np.zeros(3), cov, 50, seed=7)
    d2 = sample_mvn(np.zeros(3), cov, 50, seed=7)
    np.testing.assert_array_equal(d1, d2)


def test_sample_mvn_not_positive_definite():
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        sample_mvn(np.zeros(2), bad, 10, seed=0)


def test_generate_dataset_shapes_and_truth():
    cfg = SimConfig(n=200, m=20, q=20, rho_x=0.0, rho_m=0.0, seed=1)
    d, truth = generate_dataset(cfg)
    assert (d.n, d.m, d.q) == (200, 20, 20)
    np.testing.assert_allclose(truth.a_true[:5], 0.5)
    np.testing.assert_allclose(truth.a_true[5:], 0.0)
    np.testing.assert_allclose(truth.b_true[:5], 0.5)
    assert truth.mp_true == pytest.approx(1.0)


def test_generate_dataset_deterministic():
    cfg = SimConfig(seed=11, rho_x=0.3, rho_m=0.3)
    d1, t1 = generate_dataset(cfg)
    d2, t2 = generate_dataset(cfg)
    np.testing.assert_array_equal(np.asarray(d1.X), np.asarray(d2.X))
    np.testing.assert_array_equal(np.asarray(d1.Y), np.asarray(d2.Y))
    assert t1.eta == t2.eta


def test_population_mp_regimes():
    assert population_mp(SimConfig(regime=Regime.COMPLETE, rho_x=0.3, rho_m=0.3)) \
        == pytest.approx(1.0)
    assert population_mp(SimConfig(regime=Regime.PARTIAL, target_mp=0.5)) \
        == pytest.approx(0.5)
    assert population_mp(SimConfig(regime=Regime.PARTIAL, target_mp=0.25)) \
        == pytest.approx(0.25)
    with pytest.raises(DegenerateRegime):
        population_mp(SimConfig(misspecify=Misspecify.ZERO_A))


def test_population_mp_matches_large_sample_two_stage_ols():
    cfg = SimConfig(n=100_000, m=8, q=8, rho_x=0.3, rho_m=0.3,
                    regime=Regime.PARTIAL, target_mp=0.5, seed=5)
    d, truth = generate_dataset(cfg)
    xs = np.asarray(d.X) @ truth.a_true
    ms = np.asarray(d.M) @ truth.b_true
    alpha = (xs @ ms) / (xs @ xs)
    Z = np.column_stack([xs, ms])
    gam, eta = np.linalg.solve(Z.T @ Z, Z.T @ np.asarray(d.Y))
    emp_mp = alpha * eta / (gam + alpha * eta)
    assert emp_mp == pytest.approx(truth.mp_true, abs=0.02)


def test_conditional_mean_structure():
    cfg = SimConfig(n=100_000, m=6, q=6, rho_x=0.2, rho_m=0.2, seed=9)
    d, truth = generate_dataset(cfg)
    X = np.asarray(d.X)
    M = np.asarray(d.M)
    coefs = np.linalg.solve(X.T @ X, X.T @ M)   # m x q regression matrix
    # leading block loads -0.5 on the first s exposures; the rest are zero
    assert np.abs(coefs[:5, :5] - (-0.5)).max() < 0.05
    assert np.abs(coefs[5:, :]).max() < 0.05
    assert np.abs(coefs[:5, 5:]).max() < 0.05


def test_sample_covariance_converges():
    cfg = SimConfig(n=100_000, m=5, q=5, rho_x=0.4, rho_m=0.0, seed=3)
    d, _ = generate_dataset(cfg)
    emp = np.cov(np.asarray(d.X).T)
    target = compound_symmetry_cov(5, 0.4)
    assert np.abs(emp - target).max() < 0.05


def test_misspecified_generation():
    cfg = SimConfig(seed=2, misspecify=Misspecify.ZERO_A, regime=Regime.PARTIAL)
    d, truth = generate_dataset(cfg)
    assert np.all(truth.a_true == 0.0)
    assert np.isnan(truth.mp_true)
    cfg_b = SimConfig(seed=2, misspecify=Misspecify.ZERO_B)
    _, truth_b = generate_dataset(cfg_b)
    assert np.all(truth_b.b_true == 0.0)
