"""Independent verifiers: exhaustive search, finite differences, analytic
derivatives of the least-squares objective, and moment identification.

These routines deliberately avoid the solver's code paths so the test
suite can cross-check both sides of every computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import AggregationWeights, Dataset, Normalization, PenaltyConfig
from .errors import (
    DegenerateTau,
    InfeasibleEverywhere,
    NonFiniteEvaluation,
    RankOneViolation,
)
from .profiling import SufficientStats, _smooth_from_scalars, mp_reward


def finite_diff_grad(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient (f(x+h e_i) - f(x-h e_i)) / 2h."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(f"non-finite evaluation near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# exhaustive minimization on tiny instances
# ---------------------------------------------------------------------------

def _angle_points(eig, dim: int, resolution: int) -> np.ndarray:
    """Columns: weight vectors with unit-variance aggregates (a' G a = 1)."""
    lam, vec = eig
    half = vec @ np.diag(1.0 / np.sqrt(np.maximum(lam, 1e-300)))
    if dim == 1:
        circ = np.array([[1.0, -1.0]])
    else:
        theta = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        circ = np.vstack([np.cos(theta), np.sin(theta)])
    return half @ circ


def grid_search_min(
    d: Dataset, p: PenaltyConfig, resolution: int = 360
) -> tuple[AggregationWeights, float]:
    """Exhaustive objective evaluation on angular grids (m <= 2, q <= 2).

    Parameterizes the unit-variance-aggregate sets by angles, evaluates the
    penalized objective on every pair inside the admissible region, and
    returns the minimizer (weights reported with unit-Euclidean-norm
    aggregates).
    """
    if d.m > 2 or d.q > 2:
        raise ValueError("grid search supports m <= 2 and q <= 2 only")
    stats = SufficientStats(d)
    A = _angle_points(stats.eig_x, d.m, resolution)     # (m, Ra)
    B = _angle_points(stats.eig_m, d.q, resolution)     # (q, Rb)

    tau = A.T @ stats.vx                                 # (Ra,)
    t_m = B.T @ stats.vm                                 # (Rb,)
    alpha = A.T @ stats.cxm @ B                          # (Ra, Rb)
    big_d = 1.0 - alpha**2

    feasible = (tau[:, None] >= p.r0) & (big_d >= p.delta)
    if not feasible.any():
        raise InfeasibleEverywhere("no admissible grid point")

    y2n = stats.y2n
    with np.errstate(divide="ignore", invalid="ignore"):
        nn = tau[:, None] ** 2 + t_m[None, :] ** 2 - 2.0 * alpha * tau[:, None] * t_m[None, :]
        f = (y2n - tau[:, None] ** 2 + big_d + (y2n - nn / big_d) / big_d) / 2.0
        mp = (alpha * t_m[None, :] / tau[:, None] - alpha**2) / big_d
        reward = np.vectorize(mp_reward)(mp)
        l1a = p.lam_a * np.abs(A).sum(axis=0)
        l1b = p.lam_b * np.abs(B).sum(axis=0)
        phi = f - p.lambda_n * reward + l1a[:, None] + l1b[None, :]
    phi = np.where(feasible, phi, np.inf)
    ia, ib = np.unravel_index(np.argmin(phi), phi.shape)
    a_best = A[:, ia] / np.sqrt(d.n)
    b_best = B[:, ib] / np.sqrt(d.n)
    weights = AggregationWeights(a_best, b_best, Normalization.AGGREGATE_UNIT)
    return weights, float(phi[ia, ib])


# ---------------------------------------------------------------------------
# analytic derivatives of the least-squares part (lambda_n = 0)
# ---------------------------------------------------------------------------

def ssr_objective_value(stats: SufficientStats, a, b) -> float:
    """Least-squares smooth part at raw (a, b) (capped reward excluded)."""
    tau, alpha, t_m = stats.scalars(np.asarray(a, float), np.asarray(b, float))
    return _smooth_from_scalars(stats.y2n, tau, alpha, t_m, 0.0)


def _normalized_map_derivs(G, v, x):
    """First/second derivatives of h(x) = x'v / sqrt(x'Gx)."""
    gx = G @ x
    r = np.sqrt(float(x @ gx))
    c = float(x @ v)
    grad = v / r - c * gx / r**3
    hess = (
        -(np.outer(v, gx) + np.outer(gx, v)) / r**3
        - c * G / r**3
        + 3.0 * c * np.outer(gx, gx) / r**5
    )
    return grad, hess


def ssr_hessian(stats: SufficientStats, a, b) -> np.ndarray:
    """Analytic Hessian of the least-squares smooth part over (a, b).

    Chain rule through the three scalar fields (tau, alpha, t) of the
    normalized aggregates; returns the full (m+q) x (m+q) matrix of the
    scale-invariant extension.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, q = a.shape[0], b.shape[0]
    gx_a = stats.gx @ a
    gm_b = stats.gm @ b
    cb = stats.cxm @ b
    ca = stats.cxm.T @ a
    rx = np.sqrt(float(a @ gx_a))
    rm = np.sqrt(float(b @ gm_b))
    tau = float(a @ stats.vx) / rx
    t_m = float(b @ stats.vm) / rm
    s_ab = float(a @ cb)
    alpha = s_ab / (rx * rm)
    y2n = stats.y2n
    big_d = 1.0 - alpha * alpha
    nn = tau * tau + t_m * t_m - 2.0 * alpha * tau * t_m

    # scalar first and second partials of f(tau, alpha, t)
    f_tau = -tau - (tau - alpha * t_m) / big_d**2
    f_t = -(t_m - alpha * tau) / big_d**2
    f_alpha = (
        -alpha + alpha * y2n / big_d**2 + tau * t_m / big_d**2 - 2.0 * alpha * nn / big_d**3
    )
    f_tt_ = {}
    f_tt_["tau,tau"] = -1.0 - 1.0 / big_d**2
    f_tt_["t,t"] = -1.0 / big_d**2
    f_tt_["tau,t"] = alpha / big_d**2
    f_tt_["tau,alpha"] = t_m / big_d**2 - 4.0 * alpha * (tau - alpha * t_m) / big_d**3
    f_tt_["t,alpha"] = tau / big_d**2 - 4.0 * alpha * (t_m - alpha * tau) / big_d**3
    f_tt_["alpha,alpha"] = (
        -1.0
        + y2n / big_d**2
        + 4.0 * alpha**2 * y2n / big_d**3
        + 8.0 * alpha * tau * t_m / big_d**3
        - 2.0 * nn / big_d**3
        - 12.0 * alpha**2 * nn / big_d**4
    )

    # gradients of the scalar fields, stacked over (a, b)
    d_tau_a, h_tau_aa = _normalized_map_derivs(stats.gx, stats.vx, a)
    d_t_b, h_t_bb = _normalized_map_derivs(stats.gm, stats.vm, b)
    d_alpha_a = cb / (rx * rm) - alpha * gx_a / rx**2
    d_alpha_b = ca / (rx * rm) - alpha * gm_b / rm**2
    h_alpha_aa = (
        -(np.outer(cb, gx_a) + np.outer(gx_a, cb)) / (rx**3 * rm)
        - s_ab * stats.gx / (rx**3 * rm)
        + 3.0 * s_ab * np.outer(gx_a, gx_a) / (rx**5 * rm)
    )
    h_alpha_bb = (
        -(np.outer(ca, gm_b) + np.outer(gm_b, ca)) / (rm**3 * rx)
        - s_ab * stats.gm / (rm**3 * rx)
        + 3.0 * s_ab * np.outer(gm_b, gm_b) / (rm**5 * rx)
    )
    h_alpha_ab = (
        stats.cxm / (rx * rm)
        - np.outer(cb, gm_b) / (rx * rm**3)
        - np.outer(gx_a, ca) / (rx**3 * rm)
        + s_ab * np.outer(gx_a, gm_b) / (rx**3 * rm**3)
    )

    def stack(va, vb):
        out = np.zeros(m + q)
        if va is not None:
            out[:m] = va
        if vb is not None:
            out[m:] = vb
        return out

    g_tau = stack(d_tau_a, None)
    g_t = stack(None, d_t_b)
    g_alpha = stack(d_alpha_a, d_alpha_b)

    H = np.zeros((m + q, m + q))
    # first-derivative-weighted curvature of the scalar fields
    H[:m, :m] += f_tau * h_tau_aa + f_alpha * h_alpha_aa
    H[m:, m:] += f_t * h_t_bb + f_alpha * h_alpha_bb
    H[:m, m:] += f_alpha * h_alpha_ab
    H[m:, :m] += f_alpha * h_alpha_ab.T
    # outer products with the scalar-space Hessian
    pairs = [
        ("tau,tau", g_tau, g_tau), ("t,t", g_t, g_t),
        ("alpha,alpha", g_alpha, g_alpha),
        ("tau,t", g_tau, g_t), ("tau,alpha", g_tau, g_alpha),
        ("t,alpha", g_t, g_alpha),
    ]
    for key, u, v in pairs:
        w = f_tt_[key]
        H += w * np.outer(u, v)
        if u is not v:
            H += w * np.outer(v, u)
    return H


# ---------------------------------------------------------------------------
# moment identification (rank-one conditional-mean structure)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentifiedModel:
    """Directions and scalar products recoverable from second moments."""

    a_dir: np.ndarray
    b_dir: np.ndarray
    alpha_zero: bool
    tau_norm_a: float          # tau0 ||a0||   (gamma0 ||a0|| when alpha = 0)
    eta_norm_b: float          # eta0 ||b0||
    alpha_scale: float         # alpha0 ||a0|| / ||b0||  (0 when alpha = 0)
    tau_over_alpha_norm_b: float  # (tau0/alpha0) ||b0||  (nan when alpha = 0)


def identify_from_moments(
    sxm: np.ndarray,
    sxy: np.ndarray,
    smy: np.ndarray,
    sxx: np.ndarray,
    smm: np.ndarray,
    r0: float = 1e-3,
    rank_tol: float = 1e-6,
    alpha_zero_tol: float = 1e-10,
) -> IdentifiedModel:
    """Recover directions and identified scalars from population moments.

    Implements the constructive identification recipe: when E[X'M] = 0 the
    two simple inversions identify the directions and (gamma ||a||,
    eta ||b||); otherwise tau0 a0 comes from Sxx^{-1} Sxy, the rank-one
    conditional-mean matrix fixes the b direction and the alpha scale, and
    the residual-variance identity pins eta0 ||b0||.  Directions are
    canonicalized so the identified tau (and alpha) are positive.
    """
    sxm = np.asarray(sxm, float)
    sxy = np.asarray(sxy, float).ravel()
    smy = np.asarray(smy, float).ravel()
    sxx = np.asarray(sxx, float)
    smm = np.asarray(smm, float)

    scale = np.sqrt(np.linalg.norm(sxx, 2) * np.linalg.norm(smm, 2))
    if np.linalg.norm(sxm) <= alpha_zero_tol * max(scale, 1.0):
        eta_b = np.linalg.solve(smm, smy)
        gamma_a = np.linalg.solve(sxx, sxy)
        if np.linalg.norm(gamma_a) < r0:
            raise DegenerateTau("identified total effect below the floor")
        return IdentifiedModel(
            a_dir=gamma_a / np.linalg.norm(gamma_a),
            b_dir=eta_b / np.linalg.norm(eta_b),
            alpha_zero=True,
            tau_norm_a=float(np.linalg.norm(gamma_a)),
            eta_norm_b=float(np.linalg.norm(eta_b)),
            alpha_scale=0.0,
            tau_over_alpha_norm_b=float("nan"),
        )

    big_t = np.linalg.solve(sxx, sxm)  # = (alpha0/||b0||^2) a0 b0'
    sv = np.linalg.svd(big_t, compute_uv=False)
    resid = np.sqrt(max(np.sum(sv[1:] ** 2), 0.0)) / max(np.sqrt(np.sum(sv**2)), 1e-300)
    if resid > rank_tol:
        raise RankOneViolation(
            f"conditional-mean matrix deviates from rank one (relative residual {resid:.3e})"
        )

    v = np.linalg.solve(sxx, sxy)      # tau0 a0
    tau_norm_a = float(np.linalg.norm(v))
    if tau_norm_a < r0:
        raise DegenerateTau("identified |tau0| ||a0|| below the floor")
    a_dir = v / tau_norm_a             # canonical: tau0 > 0

    alpha_scale2 = float(np.sum(big_t**2))      # (alpha0 ||a0|| / ||b0||)^2
    alpha_scale = np.sqrt(alpha_scale2)         # canonical: alpha0 > 0
    bt_v = big_t.T @ v                          # (tau0/alpha0) * alpha_scale^2 * b0
    b_dir = bt_v / np.linalg.norm(bt_v)
    tau_over_alpha_norm_b = float(np.linalg.norm(bt_v)) / alpha_scale2

    # eta0 ||b0|| via the residual-variance identity
    axa = float(a_dir @ sxx @ a_dir)
    bmb = float(b_dir @ smm @ b_dir)
    lhs = float(b_dir @ smy) - tau_over_alpha_norm_b * alpha_scale2 * axa
    curly = bmb - alpha_scale2 * axa
    if curly <= 0:
        raise RankOneViolation("mediator residual variance is not positive")
    eta_norm_b = lhs / curly
    return IdentifiedModel(
        a_dir=a_dir,
        b_dir=b_dir,
        alpha_zero=False,
        tau_norm_a=tau_norm_a,
        eta_norm_b=float(eta_norm_b),
        alpha_scale=float(alpha_scale),
        tau_over_alpha_norm_b=tau_over_alpha_norm_b,
    )


def rank_one_moments(sxx, a0, b0, alpha0, gamma0, eta0, sigma_e):
    """Population second moments of a rank-one conditional-mean model.

    M = X A' + E with A = (alpha0/||b0||^2) b0 a0', Y = gamma0 X a0
    + eta0 M b0 + noise; returns (sxm, sxy, smy, smm) given Cov(X) = sxx
    and Cov(E) = sigma_e.
    """
    sxx = np.asarray(sxx, float)
    a0 = np.asarray(a0, float)
    b0 = np.asarray(b0, float)
    sigma_e = np.asarray(sigma_e, float)
    A = (alpha0 / float(b0 @ b0)) * np.outer(b0, a0)   # q x m
    sxm = sxx @ A.T
    smm = A @ sxx @ A.T + sigma_e
    tau0 = gamma0 + alpha0 * eta0
    sxy = tau0 * (sxx @ a0)
    smy = gamma0 * (A @ sxx @ a0) + eta0 * (smm @ b0)
    return sxm, sxy, smy, smm
