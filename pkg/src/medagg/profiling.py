"""Profiled coefficients, objective evaluation, and smooth-part gradients.

Aggregates are scaled to unit sample variance inside the objective
(||X a||^2 = n), which keeps every inner coefficient on the standardized
regression scale.  With that convention the closed forms are

    alpha = <x*, m*>_n          tau = <x*, Y>_n
    gamma = (tau - alpha t) / (1 - alpha^2)
    eta   = (t - alpha tau) / (1 - alpha^2),     t = <m*, Y>_n

with <u, v>_n = u'v / n.  The penalized objective is

    (SSR_yx + SSR_mx + SSR_yxm / (1 - alpha^2)) / (2n)
        - lambda_n * reward(alpha*eta/tau)
        + lambda_a ||a||_1 + lambda_b ||b||_1,

where reward() is the mediation proportion capped smoothly at its model
bound of 1 (see mp_reward).  All smooth quantities reduce to functions of
(tau, alpha, t), so evaluation and the analytic gradient run on
precomputed Gram matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .data import AggregationWeights, Dataset, Normalization, PenaltyConfig
from .errors import CollinearAggregates, TauBelowFloor, ZeroAggregate

DEFAULT_R0 = 1e-3
DEFAULT_DELTA = 1e-2
# half-width of the smooth cap on the mediation-proportion reward
MP_RAMP_WIDTH = 0.3
_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class ProfiledCoefficients:
    """Closed-form inner coefficients and the implied mediation proportion."""

    tau_hat: float
    alpha_hat: float
    gamma_hat: float
    eta_hat: float
    mp_hat: float


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Additive pieces of the penalized objective at one weight pair."""

    ssr_y_x: float
    ssr_m_x: float
    ssr_y_xm: float
    mp_term: float
    l1_a: float
    l1_b: float
    total: float


def mp_reward(mp: float, width: float = MP_RAMP_WIDTH) -> float:
    """Mediation-proportion reward, capped smoothly at the model bound 1.

    Behaves like mp well below 1, peaks at mp = 1 and decreases beyond
    (r(mp) = 1 - w*log(2*cosh((1-mp)/w)), slope tanh((1-mp)/w)).  The cap
    keeps the reward bounded; an uncapped linear reward would prefer
    degenerate configurations with tau near its floor.
    """
    z = (1.0 - mp) / width
    # log(2 cosh z) = |z| + log1p(exp(-2|z|)), overflow-safe
    return 1.0 - width * (abs(z) + np.log1p(np.exp(-2.0 * abs(z))))


def mp_reward_slope(mp: float, width: float = MP_RAMP_WIDTH) -> float:
    """Derivative of mp_reward."""
    return float(np.tanh((1.0 - mp) / width))


class SufficientStats:
    """Per-observation Gram matrices and cross moments of a dataset.

    Stores X'X/n, M'M/n, X'M/n, X'Y/n, M'Y/n and Y'Y/n; everything the
    objective, its gradient and the block solvers need is a function of
    these, so repeated evaluation is O(m^2 + q^2) instead of O(n(m+q)).
    """

    def __init__(self, d: Dataset):
        X, M, Y = np.asarray(d.X), np.asarray(d.M), np.asarray(d.Y)
        n = d.n
        self.n = n
        self.gx = X.T @ X / n
        self.gm = M.T @ M / n
        self.cxm = X.T @ M / n
        self.vx = X.T @ Y / n
        self.vm = M.T @ Y / n
        self.y2n = float(Y @ Y) / n

    @cached_property
    def eig_x(self):
        """Eigendecomposition of X'X/n (ascending eigenvalues)."""
        w, v = np.linalg.eigh(self.gx)
        return w, v

    @cached_property
    def eig_m(self):
        w, v = np.linalg.eigh(self.gm)
        return w, v

    def aggregate_norms(self, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
        """Sample standard deviations (sqrt of a'(X'X/n)a) of the aggregates."""
        ra2 = float(a @ self.gx @ a)
        rb2 = float(b @ self.gm @ b)
        return np.sqrt(max(ra2, 0.0)), np.sqrt(max(rb2, 0.0))

    def scalars(self, a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
        """(tau, alpha, m*'Y/n) at the unit-variance rescaling of (a, b)."""
        rx, rm = self.aggregate_norms(a, b)
        if rx < _ZERO_NORM or rm < _ZERO_NORM:
            raise ZeroAggregate("aggregate with norm below 1e-12")
        tau = float(a @ self.vx) / rx
        t_m = float(b @ self.vm) / rm
        alpha = float(a @ self.cxm @ b) / (rx * rm)
        return tau, alpha, t_m


def compute_aggregates(d: Dataset, w: AggregationWeights):
    """Latent aggregates (x*, m*) for the weight pair.

    Under the aggregate-unit convention both outputs are rescaled to unit
    Euclidean norm (the weights' implied copies rescale with them).  Raises
    ZeroAggregate when X a or M b is numerically zero.
    """
    a = np.asarray(w.a, dtype=float)
    b = np.asarray(w.b, dtype=float)
    x_star = d.X @ a
    m_star = d.M @ b
    if w.normalization is Normalization.AGGREGATE_UNIT:
        sx = np.linalg.norm(x_star)
        sm = np.linalg.norm(m_star)
        if sx < _ZERO_NORM or sm < _ZERO_NORM:
            raise ZeroAggregate("aggregate with norm below 1e-12")
        return x_star / sx, m_star / sm
    sa = np.linalg.norm(a)
    sb = np.linalg.norm(b)
    if sa < _ZERO_NORM or sb < _ZERO_NORM:
        raise ZeroAggregate("zero weight vector")
    return x_star / sa, m_star / sb


def unit_variance_weights(d: Dataset, a, b) -> tuple[np.ndarray, np.ndarray]:
    """Rescale raw (a, b) so the aggregates have unit sample variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sx = np.linalg.norm(d.X @ a) / np.sqrt(d.n)
    sm = np.linalg.norm(d.M @ b) / np.sqrt(d.n)
    if sx < _ZERO_NORM or sm < _ZERO_NORM:
        raise ZeroAggregate("aggregate with norm below 1e-12")
    return a / sx, b / sm


def _coefficients_from_scalars(
    tau: float, alpha: float, t_m: float, r0: float, delta: float
) -> ProfiledCoefficients:
    big_d = 1.0 - alpha * alpha
    if big_d < delta:
        raise CollinearAggregates(
            f"1 - alpha^2 = {big_d:.3e} below the admissibility floor {delta:.3e}"
        )
    if abs(tau) < r0:
        raise TauBelowFloor(f"|tau| = {abs(tau):.3e} below the floor {r0:.3e}")
    gamma = (tau - alpha * t_m) / big_d
    eta = (t_m - alpha * tau) / big_d
    return ProfiledCoefficients(
        tau_hat=tau,
        alpha_hat=alpha,
        gamma_hat=gamma,
        eta_hat=eta,
        mp_hat=alpha * eta / tau,
    )


def profile_coefficients(
    x_star: np.ndarray,
    m_star: np.ndarray,
    Y: np.ndarray,
    r0: float = DEFAULT_R0,
    delta: float = DEFAULT_DELTA,
) -> ProfiledCoefficients:
    """Closed-form (tau, alpha, gamma, eta, MP) from unit-norm aggregates.

    Raises CollinearAggregates when 1 - alpha^2 < delta and TauBelowFloor
    when |tau| < r0 (signs are the caller's concern).
    """
    x_star = np.asarray(x_star, dtype=float)
    m_star = np.asarray(m_star, dtype=float)
    Y = np.asarray(Y, dtype=float)
    for name, v in (("x_star", x_star), ("m_star", m_star)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-8:
            raise ZeroAggregate(f"{name} is not unit-norm")
    tau = float(x_star @ Y)
    t_m = float(m_star @ Y)
    alpha = float(x_star @ m_star)
    return _coefficients_from_scalars(tau, alpha, t_m, r0, delta)


def profile_from_stats(
    stats: SufficientStats, a, b, r0: float = DEFAULT_R0, delta: float = DEFAULT_DELTA
) -> ProfiledCoefficients:
    """Profiled coefficients at raw (a, b) on the unit-variance scale."""
    tau, alpha, t_m = stats.scalars(np.asarray(a, float), np.asarray(b, float))
    return _coefficients_from_scalars(tau, alpha, t_m, r0, delta)


def mediation_proportion(c: ProfiledCoefficients, r0: float = DEFAULT_R0) -> float:
    """alpha * eta / tau; requires |tau| >= r0."""
    if abs(c.tau_hat) < r0:
        raise TauBelowFloor(f"|tau| = {abs(c.tau_hat):.3e} below the floor {r0:.3e}")
    return c.alpha_hat * c.eta_hat / c.tau_hat


def objective_value(d: Dataset, w: AggregationWeights, p: PenaltyConfig) -> ObjectiveBreakdown:
    """Reference evaluation of the penalized objective via explicit residuals.

    Weights are rescaled internally so both aggregates have unit sample
    variance; the SSR terms and l1 norms are evaluated on that scale.
    Profiling errors (collinearity, tau floor) propagate.
    """
    a, b = unit_variance_weights(d, w.a, w.b)
    n = d.n
    x_star = d.X @ a
    m_star = d.M @ b
    tau = float(x_star @ d.Y) / n
    t_m = float(m_star @ d.Y) / n
    alpha = float(x_star @ m_star) / n
    coef = _coefficients_from_scalars(tau, alpha, t_m, p.r0, p.delta)

    r1 = d.Y - coef.tau_hat * x_star
    r2 = m_star - coef.alpha_hat * x_star
    r3 = d.Y - coef.gamma_hat * x_star - coef.eta_hat * m_star
    ssr_y_x = float(r1 @ r1)
    ssr_m_x = float(r2 @ r2)
    ssr_y_xm = float(r3 @ r3)
    mp_term = p.lambda_n * mp_reward(coef.mp_hat)
    l1_a = p.lam_a * float(np.abs(a).sum())
    l1_b = p.lam_b * float(np.abs(b).sum())
    big_d = 1.0 - coef.alpha_hat**2
    total = (ssr_y_x + ssr_m_x + ssr_y_xm / big_d) / (2 * n) - mp_term + l1_a + l1_b
    return ObjectiveBreakdown(
        ssr_y_x=ssr_y_x,
        ssr_m_x=ssr_m_x,
        ssr_y_xm=ssr_y_xm,
        mp_term=mp_term,
        l1_a=l1_a,
        l1_b=l1_b,
        total=total,
    )


# ---------------------------------------------------------------------------
# smooth part: scale-invariant evaluation and analytic gradient
# ---------------------------------------------------------------------------

def _smooth_from_scalars(y2n, tau, alpha, t_m, lambda_n):
    big_d = 1.0 - alpha * alpha
    nn = tau * tau + t_m * t_m - 2.0 * alpha * tau * t_m
    f = (y2n - tau * tau + big_d + (y2n - nn / big_d) / big_d) / 2.0
    mp = (alpha * t_m / tau - alpha * alpha) / big_d
    return f - lambda_n * mp_reward(mp)


def smooth_value(stats: SufficientStats, a, b, lambda_n: float) -> float:
    """Smooth objective part (SSR terms + capped MP reward) at raw (a, b).

    Aggregates are normalized internally, so the value is invariant to
    rescaling of a and b.
    """
    tau, alpha, t_m = stats.scalars(np.asarray(a, float), np.asarray(b, float))
    return _smooth_from_scalars(stats.y2n, tau, alpha, t_m, lambda_n)


def smooth_gradient(stats: SufficientStats, a, b, lambda_n: float):
    """Analytic gradient of smooth_value with respect to raw (a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    gx_a = stats.gx @ a
    gm_b = stats.gm @ b
    cb = stats.cxm @ b
    ca = stats.cxm.T @ a
    rx = np.sqrt(float(a @ gx_a))
    rm = np.sqrt(float(b @ gm_b))
    if rx < _ZERO_NORM or rm < _ZERO_NORM:
        raise ZeroAggregate("aggregate with norm below 1e-12")
    tau = float(a @ stats.vx) / rx
    t_m = float(b @ stats.vm) / rm
    alpha = float(a @ cb) / (rx * rm)

    d_tau_a = stats.vx / rx - tau * gx_a / rx**2
    d_alpha_a = cb / (rx * rm) - alpha * gx_a / rx**2
    d_t_b = stats.vm / rm - t_m * gm_b / rm**2
    d_alpha_b = ca / (rx * rm) - alpha * gm_b / rm**2

    y2n = stats.y2n
    big_d = 1.0 - alpha * alpha
    nn = tau * tau + t_m * t_m - 2.0 * alpha * tau * t_m
    f_tau = -tau - (tau - alpha * t_m) / big_d**2
    f_t = -(t_m - alpha * tau) / big_d**2
    f_alpha = (
        -alpha
        + alpha * y2n / big_d**2
        + tau * t_m / big_d**2
        - 2.0 * alpha * nn / big_d**3
    )
    mp = (alpha * t_m / tau - alpha * alpha) / big_d
    slope = lambda_n * mp_reward_slope(mp)
    mp_tau = -alpha * t_m / (tau * tau * big_d)
    mp_t = alpha / (tau * big_d)
    mp_alpha = (t_m / tau - 2.0 * alpha) / big_d + 2.0 * alpha * (
        alpha * t_m / tau - alpha * alpha
    ) / big_d**2

    c_tau = f_tau - slope * mp_tau
    c_t = f_t - slope * mp_t
    c_alpha = f_alpha - slope * mp_alpha

    grad_a = c_tau * d_tau_a + c_alpha * d_alpha_a
    grad_b = c_t * d_t_b + c_alpha * d_alpha_b
    return grad_a, grad_b


def mp_gradient(stats: SufficientStats, a, b):
    """(mp, d mp/d a, d mp/d b) at raw (a, b), normalization chain included."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    gx_a = stats.gx @ a
    gm_b = stats.gm @ b
    cb = stats.cxm @ b
    ca = stats.cxm.T @ a
    rx = np.sqrt(float(a @ gx_a))
    rm = np.sqrt(float(b @ gm_b))
    if rx < _ZERO_NORM or rm < _ZERO_NORM:
        raise ZeroAggregate("aggregate with norm below 1e-12")
    tau = float(a @ stats.vx) / rx
    t_m = float(b @ stats.vm) / rm
    alpha = float(a @ cb) / (rx * rm)
    big_d = 1.0 - alpha * alpha
    mp = (alpha * t_m / tau - alpha * alpha) / big_d

    d_tau_a = stats.vx / rx - tau * gx_a / rx**2
    d_alpha_a = cb / (rx * rm) - alpha * gx_a / rx**2
    d_t_b = stats.vm / rm - t_m * gm_b / rm**2
    d_alpha_b = ca / (rx * rm) - alpha * gm_b / rm**2
    mp_tau = -alpha * t_m / (tau * tau * big_d)
    mp_t = alpha / (tau * big_d)
    mp_alpha = (t_m / tau - 2.0 * alpha) / big_d + 2.0 * alpha * (
        alpha * t_m / tau - alpha * alpha
    ) / big_d**2
    return mp, mp_tau * d_tau_a + mp_alpha * d_alpha_a, mp_t * d_t_b + mp_alpha * d_alpha_b
