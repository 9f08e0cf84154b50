"""Synthetic data generation with known ground truth.

Exposures are multivariate normal with compound-symmetry covariance;
mediators follow M_i ~ N(L' X_i, Sigma_M) where L carries a -0.5 block on
the leading s exposures and s mediators; the outcome is a linear
combination of the true aggregates plus Gaussian noise.  The block
structure makes the conditional mean E[M | X] rank one, so the moment
identification recipe applies exactly.

Regimes calibrate (gamma, eta) from the analytic population regression
slope of M* on X*: the indirect effect alpha*eta is fixed at 0.5 and
gamma is chosen to hit the target mediation proportion (0 for complete
mediation).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, validate_dataset
from .errors import DegenerateRegime, InvalidRho, NotPositiveDefinite

INDIRECT_EFFECT = 0.5  # alpha * eta in every calibrated regime


class Regime(enum.Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"
    CUSTOM = "custom"


class Misspecify(enum.Enum):
    NONE = "none"
    ZERO_A = "zero_a"
    ZERO_B = "zero_b"


@dataclass(frozen=True)
class SimConfig:
    """All knobs of the synthetic data-generating process."""

    n: int = 200
    m: int = 20
    q: int = 20
    rho_x: float = 0.0
    rho_m: float = 0.0
    c: float = 0.5
    s: int = 5
    sigma_y2: float = 1.0
    regime: Regime = Regime.COMPLETE
    target_mp: float = 0.5
    gamma: float | None = None  # CUSTOM regime only
    eta: float | None = None
    L_value: float = -0.5
    seed: int = 0
    misspecify: Misspecify = Misspecify.NONE

    def __post_init__(self):
        if not (0 <= self.rho_x < 1 and 0 <= self.rho_m < 1):
            raise InvalidRho("correlations must lie in [0, 1)")
        if self.s > min(self.m, self.q):
            raise ValueError("s must not exceed min(m, q)")
        if self.sigma_y2 <= 0:
            raise ValueError("sigma_y2 must be positive")
        if self.regime is Regime.PARTIAL and not 0 < self.target_mp <= 1:
            raise ValueError("target_mp must lie in (0, 1]")
        if self.regime is Regime.CUSTOM and (self.gamma is None or self.eta is None):
            raise ValueError("CUSTOM regime requires gamma and eta")


@dataclass(frozen=True)
class SimTruth:
    """Generating weights, structural coefficients and population MP."""

    a_true: np.ndarray
    b_true: np.ndarray
    gamma: float
    eta: float
    mp_true: float
    population_alpha: float


def compound_symmetry_cov(dim: int, rho: float) -> np.ndarray:
    """(1 - rho) I + rho 11'; positive definite for rho in [0, 1)."""
    if not 0 <= rho < 1:
        raise InvalidRho(f"rho = {rho} outside [0, 1)")
    return (1.0 - rho) * np.eye(dim) + rho * np.ones((dim, dim))


def sample_mvn(mean, cov, n: int, seed) -> np.ndarray:
    """n i.i.d. multivariate normal draws via the Cholesky factor.

    seed may be an integer or a numpy Generator.
    """
    cov = np.asarray(cov, dtype=float)
    mean = np.asarray(mean, dtype=float)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance is not positive definite") from exc
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n, cov.shape[0]))
    return mean + z @ chol.T


def _loading_matrix(cfg: SimConfig) -> np.ndarray:
    L = np.zeros((cfg.m, cfg.q))
    L[: cfg.s, : cfg.s] = cfg.L_value
    return L


def _population_alpha(cfg: SimConfig) -> float:
    """Population regression slope of M* on X* (cov / var)."""
    sig_x = compound_symmetry_cov(cfg.m, cfg.rho_x)
    L = _loading_matrix(cfg)
    a = np.zeros(cfg.m); a[: cfg.s] = cfg.c
    b = np.zeros(cfg.q); b[: cfg.s] = cfg.c
    var_x = float(a @ sig_x @ a)
    if var_x < 1e-12:
        raise DegenerateRegime("true exposure aggregate has zero variance")
    return float(a @ sig_x @ (L @ b)) / var_x


def _structural_coefficients(cfg: SimConfig) -> tuple[float, float, float]:
    """(gamma, eta, population alpha) for the configured regime."""
    alpha = _population_alpha(cfg)
    if cfg.regime is Regime.CUSTOM:
        return float(cfg.gamma), float(cfg.eta), alpha
    if abs(alpha) < 1e-12:
        raise DegenerateRegime("population alpha is zero; cannot calibrate eta")
    eta = INDIRECT_EFFECT / alpha
    if cfg.regime is Regime.COMPLETE:
        gamma = 0.0
    else:  # PARTIAL: gamma = alpha*eta * (1/MP - 1) hits the target exactly
        gamma = INDIRECT_EFFECT * (1.0 / cfg.target_mp - 1.0)
    return gamma, eta, alpha


def population_mp(cfg: SimConfig) -> float:
    """Analytic mediation proportion alpha*eta / (gamma + alpha*eta)."""
    if cfg.misspecify is not Misspecify.NONE:
        raise DegenerateRegime("mediation proportion undefined under misspecification")
    gamma, eta, alpha = _structural_coefficients(cfg)
    total = gamma + alpha * eta
    if abs(total) < 1e-12:
        raise DegenerateRegime("total effect gamma + alpha*eta is zero")
    return alpha * eta / total


def generate_dataset(cfg: SimConfig) -> tuple[Dataset, SimTruth]:
    """Draw one dataset and its generating truth; deterministic per seed."""
    rng = np.random.default_rng(cfg.seed & 0xFFFFFFFFFFFFFFFF)
    sig_x = compound_symmetry_cov(cfg.m, cfg.rho_x)
    sig_m = compound_symmetry_cov(cfg.q, cfg.rho_m)
    L = _loading_matrix(cfg)
    gamma, eta, alpha = _structural_coefficients(cfg)

    X = sample_mvn(np.zeros(cfg.m), sig_x, cfg.n, rng)
    E_m = sample_mvn(np.zeros(cfg.q), sig_m, cfg.n, rng)
    M = X @ L + E_m

    a = np.zeros(cfg.m); a[: cfg.s] = cfg.c
    b = np.zeros(cfg.q); b[: cfg.s] = cfg.c
    a_gen, b_gen = a, b
    if cfg.misspecify is Misspecify.ZERO_A:
        a_gen = np.zeros(cfg.m)
    elif cfg.misspecify is Misspecify.ZERO_B:
        b_gen = np.zeros(cfg.q)

    eps_y = rng.normal(scale=np.sqrt(cfg.sigma_y2), size=cfg.n)
    Y = gamma * (X @ a_gen) + eta * (M @ b_gen) + eps_y

    if cfg.misspecify is Misspecify.NONE:
        mp_true = alpha * eta / (gamma + alpha * eta)
    else:
        mp_true = float("nan")
    truth = SimTruth(
        a_true=a_gen.copy(),
        b_true=b_gen.copy(),
        gamma=gamma,
        eta=eta,
        mp_true=mp_true,
        population_alpha=alpha,
    )
    return validate_dataset(X, M, Y), truth
