"""Two-block ADMM with profiled scalars, soft-thresholding and multi-start.

Each outer iteration profiles the inner coefficients (tau, alpha, gamma,
eta) at the current point, freezes them together with the first-order
tilt of the capped mediation-proportion reward, solves the two strictly
convex block quadratics exactly through cached eigendecompositions,
projects the aggregates back to unit sample variance, soft-thresholds the
consensus copies, and performs the scaled dual ascent.

Iterates live on the unit-variance aggregate scale, where weight entries
are standardized regression coefficients and the l1 levels of the usual
0.02-0.5 grid act like ordinary lasso penalties.  Reported weights are
rescaled to the unit-Euclidean-norm aggregate convention.

Chains that leave the admissible region are abandoned; the surviving
restart with the lowest penalized objective is reported, with the
exactly-sparse consensus vectors as the final weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import AggregationWeights, Dataset, Normalization, PenaltyConfig
from .errors import (
    NoAdmissibleSolution,
    NonDescentDetected,
    SingularBlockSystem,
    TauBelowFloor,
    ZeroAggregate,
)
from .profiling import (
    ProfiledCoefficients,
    SufficientStats,
    _coefficients_from_scalars,
    _smooth_from_scalars,
    mp_gradient,
    mp_reward,
    mp_reward_slope,
    smooth_gradient,
    smooth_value,
)

# tolerated augmented-Lagrangian increase within one exact block/prox solve
DESCENT_SLACK = 1e-8
NONDESCENT_ERROR = 1e-6
HESSIAN_EIG_FLOOR = -1e-6
_ZERO = 1e-12


@dataclass
class SolverOptions:
    """Iteration limits, tolerances and multi-start configuration."""

    max_iter: int = 500
    eps_pri: float = 1e-4
    eps_dual: float = 1e-4
    rel_obj_tol: float = 1e-6
    rel_obj_patience: int = 20
    restarts: int = 10
    seed: int = 0
    hessian_check: bool = True
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        for name in ("eps_pri", "eps_dual", "rel_obj_tol", "fd_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


class ConvergenceStatus(enum.Enum):
    CONTINUE = "continue"
    CONVERGED_RESIDUALS = "converged_residuals"
    CONVERGED_OBJECTIVE = "converged_objective"
    MAX_ITER = "max_iter"


@dataclass
class SolverState:
    """Mutable iterate bundle of one ADMM chain (unit-variance scale)."""

    a: np.ndarray
    b: np.ndarray
    z_a: np.ndarray
    z_b: np.ndarray
    u_a: np.ndarray
    u_b: np.ndarray
    frozen: ProfiledCoefficients | None = None
    tilt_a: np.ndarray | None = None
    tilt_b: np.ndarray | None = None
    k: int = 0
    obj_trace: list = field(default_factory=list)
    r_trace: list = field(default_factory=list)
    s_trace: list = field(default_factory=list)
    delta_trace: list = field(default_factory=list)   # ||a-z_a||^2 + ||b-z_b||^2
    descent_gaps: list = field(default_factory=list)  # per exact solve, should be <= 0


@dataclass(frozen=True)
class FitResult:
    """Canonicalized solution of one fit call."""

    weights: AggregationWeights
    coefficients: ProfiledCoefficients
    objective: float
    iterations: int
    converged: bool
    primal_residual_final: float
    dual_residual_final: float
    support_a: tuple
    support_b: tuple
    restarts_used: int
    is_local_min: bool
    min_eigenvalue: float = float("nan")
    status: ConvergenceStatus = ConvergenceStatus.MAX_ITER
    restart_objectives: tuple = ()
    obj_trace: tuple = ()
    max_descent_gap: float = 0.0
    n_obs: int = 0


def soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    """Elementwise sgn(v) * (|v| - kappa)_+ with sgn(0) = 0."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def initialize_weights(
    d: Dataset, seed: int, restart_index: int, stats: SufficientStats | None = None
) -> AggregationWeights:
    """Start from the X'Y and (residualized) M'Y directions, perturbed per restart.

    Restart 0 sets a proportional to X'Y and b proportional to M'Y; restart 1
    residualizes Y on the initial exposure aggregate before projecting onto
    M; later restarts perturb the first start with seeded isotropic noise.
    Output has unit-Euclidean-norm aggregates and tau >= 0.
    """
    stats = stats or SufficientStats(d)
    scale = max(1.0, np.sqrt(stats.y2n))
    a0 = stats.vx.copy()
    if np.linalg.norm(a0) < 1e-12 * scale:
        a0 = np.ones(d.m)
    sx = np.sqrt(max(float(a0 @ stats.gx @ a0), 0.0))
    if sx < _ZERO:
        raise ZeroAggregate("X (X'Y) is numerically zero")
    a0 = a0 / sx
    if restart_index == 1:
        # alternative deterministic start: project out the x*-explained part
        tau0 = float(a0 @ stats.vx)
        b0 = stats.vm - (stats.cxm.T @ a0) * tau0
    else:
        b0 = stats.vm.copy()
    if np.linalg.norm(b0) < 1e-12 * scale:
        b0 = np.ones(d.q)
    if restart_index > 1:
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, restart_index])
        a0 = a0 + rng.normal(scale=np.linalg.norm(a0) / np.sqrt(d.m), size=d.m)
        b0 = b0 + rng.normal(scale=np.linalg.norm(b0) / np.sqrt(d.q), size=d.q)
    # report on the unit-Euclidean-aggregate convention
    sx = np.linalg.norm(d.X @ a0)
    sm = np.linalg.norm(d.M @ b0)
    if sx < _ZERO or sm < _ZERO:
        raise ZeroAggregate("degenerate initialization")
    a0, b0 = a0 / sx, b0 / sm
    if float(a0 @ stats.vx) < 0:
        a0 = -a0
    return AggregationWeights(a0, b0, Normalization.AGGREGATE_UNIT)


def _solve_block(eig, kappa: float, rho: float, rhs: np.ndarray) -> np.ndarray:
    """argmin of (kappa/2) w'Gw - rhs'w + (rho/2)||w||^2 via cached eigh of G."""
    lam, vec = eig
    denom = kappa * lam + rho
    if not np.all(np.isfinite(denom)) or np.min(denom) <= 0:
        raise SingularBlockSystem("block normal-equation matrix is not positive definite")
    return vec @ ((vec.T @ rhs) / denom)


# relaxation factor for the reward tilt; damps the tilt-iterate feedback
# loop without moving fixed points
TILT_DAMPING = 1.0


def _freeze(state: SolverState, stats: SufficientStats, p: PenaltyConfig):
    """Profile scalars and the (damped) reward tilt at the current iterate."""
    tau, alpha, t_m = stats.scalars(state.a, state.b)
    big_d = 1.0 - alpha * alpha
    state.frozen = ProfiledCoefficients(
        tau_hat=tau,
        alpha_hat=alpha,
        gamma_hat=(tau - alpha * t_m) / big_d,
        eta_hat=(t_m - alpha * tau) / big_d,
        mp_hat=alpha * (t_m - alpha * tau) / (big_d * tau),
    )
    if p.lambda_n > 0:
        mp, gmp_a, gmp_b = mp_gradient(stats, state.a, state.b)
        slope = p.lambda_n * mp_reward_slope(mp)
        new_a = slope * gmp_a
        new_b = slope * gmp_b
        if state.tilt_a is None:
            state.tilt_a, state.tilt_b = new_a, new_b
        else:
            beta = TILT_DAMPING
            state.tilt_a = (1.0 - beta) * state.tilt_a + beta * new_a
            state.tilt_b = (1.0 - beta) * state.tilt_b + beta * new_b
    else:
        state.tilt_a = np.zeros(state.a.shape[0])
        state.tilt_b = np.zeros(state.b.shape[0])


def _a_rhs(state: SolverState, stats: SufficientStats, p: PenaltyConfig):
    c = state.frozen
    big_d = 1.0 - c.alpha_hat**2
    kappa = c.tau_hat**2 + c.alpha_hat**2 + c.gamma_hat**2 / big_d
    cb = stats.cxm @ state.b
    rhs = (
        c.tau_hat * stats.vx
        + c.alpha_hat * cb
        + (c.gamma_hat / big_d) * (stats.vx - c.eta_hat * cb)
        + state.tilt_a
        + p.rho * (state.z_a - state.u_a)
    )
    return kappa, rhs


def _b_rhs(state: SolverState, stats: SufficientStats, p: PenaltyConfig):
    c = state.frozen
    big_d = 1.0 - c.alpha_hat**2
    kappa = 1.0 + c.eta_hat**2 / big_d
    ca = stats.cxm.T @ state.a
    rhs = (
        c.alpha_hat * ca
        + (c.eta_hat / big_d) * (stats.vm - c.gamma_hat * ca)
        + state.tilt_b
        + p.rho * (state.z_b - state.u_b)
    )
    return kappa, rhs


def _a_solve_raw(state: SolverState, stats: SufficientStats, p: PenaltyConfig) -> np.ndarray:
    kappa, rhs = _a_rhs(state, stats, p)
    return _solve_block(stats.eig_x, kappa, p.rho, rhs)


def _b_solve_raw(state: SolverState, stats: SufficientStats, p: PenaltyConfig) -> np.ndarray:
    kappa, rhs = _b_rhs(state, stats, p)
    return _solve_block(stats.eig_m, kappa, p.rho, rhs)


def a_update(
    state: SolverState,
    d: Dataset,
    p: PenaltyConfig,
    stats: SufficientStats | None = None,
) -> np.ndarray:
    """Exact minimizer of the frozen a-block, rescaled to a unit-variance aggregate."""
    stats = stats or SufficientStats(d)
    if state.frozen is None:
        _freeze(state, stats, p)
    a_new = _a_solve_raw(state, stats, p)
    sx = np.sqrt(max(float(a_new @ stats.gx @ a_new), 0.0))
    if sx < _ZERO:
        raise ZeroAggregate("a-block solution has zero aggregate")
    return a_new / sx


def b_update(
    state: SolverState,
    d: Dataset,
    p: PenaltyConfig,
    stats: SufficientStats | None = None,
) -> np.ndarray:
    """Exact minimizer of the frozen b-block, rescaled to a unit-variance aggregate."""
    stats = stats or SufficientStats(d)
    if state.frozen is None:
        _freeze(state, stats, p)
    b_new = _b_solve_raw(state, stats, p)
    sm = np.sqrt(max(float(b_new @ stats.gm @ b_new), 0.0))
    if sm < _ZERO:
        raise ZeroAggregate("b-block solution has zero aggregate")
    return b_new / sm


def dual_update(state: SolverState, rho: float) -> SolverState:
    """Scaled dual ascent u <- u + (a - z)."""
    state.u_a = state.u_a + (state.a - state.z_a)
    state.u_b = state.u_b + (state.b - state.z_b)
    return state


def check_convergence(state: SolverState, opts: SolverOptions) -> ConvergenceStatus:
    """Residual- and objective-based stopping decision after an iteration."""
    if not state.r_trace:
        return ConvergenceStatus.CONTINUE
    if state.r_trace[-1] <= opts.eps_pri and state.s_trace[-1] <= opts.eps_dual:
        return ConvergenceStatus.CONVERGED_RESIDUALS
    if len(state.obj_trace) > opts.rel_obj_patience:
        tail = state.obj_trace[-(opts.rel_obj_patience + 1):]
        ok = all(
            abs(tail[i + 1] - tail[i]) < opts.rel_obj_tol * max(abs(tail[i]), 1e-8)
            for i in range(opts.rel_obj_patience)
        )
        if ok:
            return ConvergenceStatus.CONVERGED_OBJECTIVE
    if state.k >= opts.max_iter:
        return ConvergenceStatus.MAX_ITER
    return ConvergenceStatus.CONTINUE


def canonicalize_signs(
    w: AggregationWeights, c: ProfiledCoefficients
) -> tuple[AggregationWeights, ProfiledCoefficients]:
    """Flip signs so tau > 0 and alpha >= 0; the mediation proportion is unchanged."""
    a, b = np.asarray(w.a, float), np.asarray(w.b, float)
    tau, alpha, gamma, eta = c.tau_hat, c.alpha_hat, c.gamma_hat, c.eta_hat
    if abs(tau) < 1e-300:
        raise TauBelowFloor("tau is zero; cannot canonicalize")
    if tau < 0:
        a = -a
        tau, alpha, gamma = -tau, -alpha, -gamma
    if alpha < 0:
        b = -b
        alpha, eta = -alpha, -eta
    c2 = ProfiledCoefficients(tau, alpha, gamma, eta, c.mp_hat)
    return AggregationWeights(a, b, w.normalization), c2


# ---------------------------------------------------------------------------
# curvature screen
# ---------------------------------------------------------------------------

def fd_hessian_min_eig(f, x0: np.ndarray, basis: np.ndarray, step: float):
    """Min eigenvalue of the central-FD Hessian of f along basis columns.

    basis is (dim, k) with orthonormal columns; returns (min_eig, is_local_min)
    using the -1e-6 eigenvalue floor.
    """
    k = basis.shape[1]
    if k == 0:
        return 0.0, True
    h = step
    f0 = f(x0)
    hess = np.empty((k, k))
    for i in range(k):
        ei = basis[:, i]
        fp = f(x0 + h * ei)
        fm = f(x0 - h * ei)
        hess[i, i] = (fp - 2.0 * f0 + fm) / h**2
        for j in range(i + 1, k):
            ej = basis[:, j]
            fpp = f(x0 + h * ei + h * ej)
            fpm = f(x0 + h * ei - h * ej)
            fmp = f(x0 - h * ei + h * ej)
            fmm = f(x0 - h * ei - h * ej)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h**2)
    min_eig = float(np.linalg.eigvalsh(hess)[0])
    return min_eig, min_eig >= HESSIAN_EIG_FLOOR


def tangent_space_basis(
    stats: SufficientStats,
    a: np.ndarray,
    b: np.ndarray,
    support_a,
    support_b,
    exclude_radial: bool = False,
) -> np.ndarray:
    """Orthonormal basis of the constraint tangent space on the active support.

    Directions satisfy (Xa)'X da = 0 and (Mb)'M db = 0 with coordinates off
    the supports frozen at zero.  With exclude_radial the Euclidean-radial
    directions (a, b themselves) are also quotiented out; they carry the
    multiplier of the rescaling step that enforces the constraints.
    Returns an (m+q, k) matrix.
    """
    m, q = a.shape[0], b.shape[0]
    cols = []

    def _side(normal, radial, support, offset):
        idx = np.asarray(sorted(support), dtype=int)
        if idx.size <= 1:
            return
        normals = [normal[idx]]
        if exclude_radial:
            normals.append(radial[idx])
        Nmat = np.column_stack(normals)
        nn = np.linalg.norm(Nmat)
        if nn < 1e-300:
            local = np.eye(idx.size)
        else:
            Qn, _ = np.linalg.qr(Nmat)
            proj = np.eye(idx.size) - Qn @ Qn.T
            u, s, _ = np.linalg.svd(proj)
            local = u[:, s > 1e-10]
        for col in local.T:
            v = np.zeros(m + q)
            v[offset + idx] = col
            cols.append(v)

    _side(stats.gx @ a, a, support_a, 0)
    _side(stats.gm @ b, b, support_b, m)
    if not cols:
        return np.zeros((m + q, 0))
    return np.column_stack(cols)


def tangent_hessian_check(
    d: Dataset,
    w: AggregationWeights,
    p: PenaltyConfig,
    fd_step: float = 1e-5,
    stats: SufficientStats | None = None,
    support_a=None,
    support_b=None,
):
    """Finite-difference curvature of the smooth objective on the tangent space.

    Evaluated on the unit-variance weight scale; coordinates with exactly
    zero weight sit at the l1 kink and are excluded from the basis.
    Returns (min_eigenvalue, is_local_min); never raises.
    """
    stats = stats or SufficientStats(d)
    try:
        rx, rm = stats.aggregate_norms(np.asarray(w.a, float), np.asarray(w.b, float))
        a = np.asarray(w.a, float) / rx
        b = np.asarray(w.b, float) / rm
    except Exception:
        return float("nan"), False
    if support_a is None:
        support_a = np.flatnonzero(a != 0.0)
    if support_b is None:
        support_b = np.flatnonzero(b != 0.0)
    basis = tangent_space_basis(stats, a, b, support_a, support_b)
    x0 = np.concatenate([a, b])
    m = a.shape[0]

    # curvature of the least-squares landscape; the capped reward enters the
    # block solves as a first-order tilt, so its curvature is not screened
    def f(x):
        return smooth_value(stats, x[:m], x[m:], 0.0)

    try:
        return fd_hessian_min_eig(f, x0, basis, fd_step)
    except Exception:
        return float("nan"), False


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass
class _ChainResult:
    weights: AggregationWeights | None
    coefficients: ProfiledCoefficients | None
    objective: float
    iterations: int
    status: ConvergenceStatus
    state: SolverState | None
    admissible: bool
    is_local_min: bool
    min_eigenvalue: float
    reason: str = ""


def _frozen_surrogate(state: SolverState, stats, p, a, b, z_a, z_b):
    """Frozen-scalar augmented Lagrangian at (a, b, z) with the current duals."""
    c = state.frozen
    big_d = 1.0 - c.alpha_hat**2
    agxa = float(a @ stats.gx @ a)
    bgmb = float(b @ stats.gm @ b)
    acb = float(a @ stats.cxm @ b)
    avx = float(a @ stats.vx)
    bvm = float(b @ stats.vm)
    ssr1 = stats.y2n - 2 * c.tau_hat * avx + c.tau_hat**2 * agxa
    ssr2 = bgmb - 2 * c.alpha_hat * acb + c.alpha_hat**2 * agxa
    ssr3 = (
        stats.y2n
        + c.gamma_hat**2 * agxa
        + c.eta_hat**2 * bgmb
        + 2 * c.gamma_hat * c.eta_hat * acb
        - 2 * c.gamma_hat * avx
        - 2 * c.eta_hat * bvm
    )
    val = (ssr1 + ssr2 + ssr3 / big_d) / 2.0
    val -= float(state.tilt_a @ a) + float(state.tilt_b @ b)
    val += p.lam_a * np.abs(z_a).sum() + p.lam_b * np.abs(z_b).sum()
    pr_a = a - z_a + state.u_a
    pr_b = b - z_b + state.u_b
    val += 0.5 * p.rho * (float(pr_a @ pr_a) + float(pr_b @ pr_b))
    return val


def _run_chain(
    d: Dataset,
    p: PenaltyConfig,
    opts: SolverOptions,
    stats: SufficientStats,
    restart_index: int,
) -> _ChainResult:
    try:
        w0 = initialize_weights(d, opts.seed, restart_index, stats)
        a0, b0 = w0.a, w0.b
        rx, rm = stats.aggregate_norms(a0, b0)
        a0, b0 = a0 / rx, b0 / rm  # unit-variance scale
    except ZeroAggregate:
        return _ChainResult(None, None, np.inf, 0, ConvergenceStatus.MAX_ITER,
                            None, False, False, float("nan"), "init failed")
    state = SolverState(
        a=a0.copy(), b=b0.copy(),
        z_a=a0.copy(), z_b=b0.copy(),
        u_a=np.zeros(d.m), u_b=np.zeros(d.q),
    )
    kap_a = p.lam_a / p.rho
    kap_b = p.lam_b / p.rho
    status = ConvergenceStatus.MAX_ITER
    while True:
        try:
            tau, alpha, t_m = stats.scalars(state.a, state.b)
        except ZeroAggregate:
            return _ChainResult(None, None, np.inf, state.k, status, state,
                                False, False, float("nan"), "zero aggregate")
        if tau < 0:
            state.a, state.z_a, state.u_a = -state.a, -state.z_a, -state.u_a
            if state.tilt_a is not None:
                state.tilt_a = -state.tilt_a
            tau, alpha = -tau, -alpha
        if abs(tau) < p.r0 or (1.0 - alpha * alpha) < p.delta:
            return _ChainResult(None, None, np.inf, state.k, status, state,
                                False, False, float("nan"), "left admissible region")
        _freeze(state, stats, p)

        # exact block/prox solves; each exact minimization must not increase
        # the frozen surrogate (the renormalization afterwards is a separate
        # feasibility projection and is excluded from this accounting)
        l0 = _frozen_surrogate(state, stats, p, state.a, state.b, state.z_a, state.z_b)
        try:
            a_raw = _a_solve_raw(state, stats, p)
            sx = np.sqrt(max(float(a_raw @ stats.gx @ a_raw), 0.0))
            if sx < _ZERO:
                raise ZeroAggregate("a-block solution has zero aggregate")
        except (ZeroAggregate, SingularBlockSystem) as exc:
            return _ChainResult(None, None, np.inf, state.k, status, state,
                                False, False, float("nan"), str(exc))
        gap_a = _frozen_surrogate(state, stats, p, a_raw, state.b, state.z_a, state.z_b) - l0
        state.a = a_raw / sx
        l1 = _frozen_surrogate(state, stats, p, state.a, state.b, state.z_a, state.z_b)
        try:
            b_raw = _b_solve_raw(state, stats, p)
            sm = np.sqrt(max(float(b_raw @ stats.gm @ b_raw), 0.0))
            if sm < _ZERO:
                raise ZeroAggregate("b-block solution has zero aggregate")
        except (ZeroAggregate, SingularBlockSystem) as exc:
            return _ChainResult(None, None, np.inf, state.k, status, state,
                                False, False, float("nan"), str(exc))
        gap_b = _frozen_surrogate(state, stats, p, state.a, b_raw, state.z_a, state.z_b) - l1
        state.b = b_raw / sm
        l2 = _frozen_surrogate(state, stats, p, state.a, state.b, state.z_a, state.z_b)

        z_a_prev, z_b_prev = state.z_a, state.z_b
        state.z_a = soft_threshold(state.a + state.u_a, kap_a)
        state.z_b = soft_threshold(state.b + state.u_b, kap_b)
        l3 = _frozen_surrogate(state, stats, p, state.a, state.b, state.z_a, state.z_b)
        gap_z = l3 - l2

        gap = max(gap_a, gap_b, gap_z)
        state.descent_gaps.append(gap)
        if gap > NONDESCENT_ERROR:
            raise NonDescentDetected(
                f"an exact solve raised the augmented Lagrangian by {gap:.3e} "
                f"at iteration {state.k}"
            )

        dual_update(state, p.rho)

        r_a = state.a - state.z_a
        r_b = state.b - state.z_b
        r_inf = max(np.abs(r_a).max(), np.abs(r_b).max())
        s_inf = p.rho * max(
            np.abs(state.z_a - z_a_prev).max(), np.abs(state.z_b - z_b_prev).max()
        )
        state.r_trace.append(float(r_inf))
        state.s_trace.append(float(s_inf))
        state.delta_trace.append(float(r_a @ r_a + r_b @ r_b))
        state.obj_trace.append(float(l3))
        state.k += 1

        status = check_convergence(state, opts)
        if status is not ConvergenceStatus.CONTINUE:
            break

    return _finalize_chain(d, p, opts, stats, state, status)


def _finalize_chain(d, p, opts, stats, state, status) -> _ChainResult:
    z_a, z_b = state.z_a, state.z_b
    if not np.any(z_a) or not np.any(z_b):
        return _ChainResult(None, None, np.inf, state.k, status, state,
                            False, False, float("nan"), "all weights shrunk to zero")
    sx, sm = stats.aggregate_norms(z_a, z_b)
    if sx < _ZERO or sm < _ZERO:
        return _ChainResult(None, None, np.inf, state.k, status, state,
                            False, False, float("nan"), "zero aggregate at the solution")
    a_fin, b_fin = z_a / sx, z_b / sm
    tau, alpha, t_m = stats.scalars(a_fin, b_fin)
    if tau < 0:
        a_fin, tau, alpha = -a_fin, -tau, -alpha
    if alpha < 0:
        b_fin, alpha, t_m = -b_fin, -alpha, -t_m
    if abs(tau) < p.r0 or (1.0 - alpha * alpha) < p.delta:
        return _ChainResult(None, None, np.inf, state.k, status, state,
                            False, False, float("nan"), "solution outside admissible region")
    coef = _coefficients_from_scalars(tau, alpha, t_m, p.r0, p.delta)
    smooth = _smooth_from_scalars(stats.y2n, tau, alpha, t_m, p.lambda_n)
    objective = smooth + p.lam_a * np.abs(a_fin).sum() + p.lam_b * np.abs(b_fin).sum()

    # report on the unit-Euclidean-aggregate convention (exact zeros preserved)
    a_pub = a_fin / np.sqrt(stats.n)
    b_pub = b_fin / np.sqrt(stats.n)
    weights = AggregationWeights(a_pub, b_pub, Normalization.AGGREGATE_UNIT)
    sup_a = np.flatnonzero(a_fin != 0.0)
    sup_b = np.flatnonzero(b_fin != 0.0)
    if opts.hessian_check:
        min_eig, is_min = tangent_hessian_check(
            d, weights, p, opts.fd_step, stats, sup_a, sup_b
        )
    else:
        min_eig, is_min = float("nan"), True
    return _ChainResult(
        weights=weights,
        coefficients=coef,
        objective=float(objective),
        iterations=state.k,
        status=status,
        state=state,
        admissible=True,
        is_local_min=is_min,
        min_eigenvalue=min_eig,
    )


def fit(
    d: Dataset,
    p: PenaltyConfig,
    opts: SolverOptions | None = None,
    stats: SufficientStats | None = None,
) -> FitResult:
    """Multi-start ADMM minimization of the penalized mediation objective.

    Runs opts.restarts independent chains, discards chains ending outside
    the admissible region or failing the curvature screen, and returns the
    lowest-objective survivor (ties to the lowest restart index).  Reported
    weights are the consensus vectors, so zeros are exact.
    """
    opts = opts or SolverOptions()
    stats = stats or SufficientStats(d)
    chains: list[_ChainResult] = []
    for r in range(opts.restarts):
        chains.append(_run_chain(d, p, opts, stats, r))

    restart_objectives = tuple(c.objective for c in chains)
    admissible = [(c.objective, i, c) for i, c in enumerate(chains) if c.admissible]
    # drop screen-flagged chains only when a screened-clean alternative exists
    survivors = [t for t in admissible if t[2].is_local_min] or admissible
    if not survivors:
        reasons = {c.reason for c in chains if c.reason}
        raise NoAdmissibleSolution(
            "all restarts rejected"
            + (f" ({'; '.join(sorted(reasons))})" if reasons else "")
        )
    _, best_idx, best = min(survivors, key=lambda t: (t[0], t[1]))
    state = best.state
    converged = best.status in (
        ConvergenceStatus.CONVERGED_RESIDUALS,
        ConvergenceStatus.CONVERGED_OBJECTIVE,
    )
    gaps = [g for c in chains if c.state for g in c.state.descent_gaps]
    return FitResult(
        weights=best.weights,
        coefficients=best.coefficients,
        objective=best.objective,
        iterations=best.iterations,
        converged=converged,
        primal_residual_final=state.r_trace[-1] if state.r_trace else float("nan"),
        dual_residual_final=state.s_trace[-1] if state.s_trace else float("nan"),
        support_a=tuple(int(i) for i in np.flatnonzero(best.weights.a != 0.0)),
        support_b=tuple(int(j) for j in np.flatnonzero(best.weights.b != 0.0)),
        restarts_used=opts.restarts,
        is_local_min=best.is_local_min,
        min_eigenvalue=best.min_eigenvalue,
        status=best.status,
        restart_objectives=restart_objectives,
        obj_trace=tuple(state.obj_trace),
        max_descent_gap=float(max(gaps)) if gaps else 0.0,
        n_obs=stats.n,
    )


def profiled_partial_gradient(
    stats: SufficientStats, a: np.ndarray, b: np.ndarray, p: PenaltyConfig
):
    """Smooth-part gradient with the inner coefficients at their profiled values.

    This is the first-order object the block solves drive to the l1
    stationarity balance: profiled scalars are held at their closed-form
    values (not differentiated through) and the capped reward enters via
    its exact first-order tilt.
    """
    tau, alpha, t_m = stats.scalars(a, b)
    big_d = 1.0 - alpha * alpha
    gamma = (tau - alpha * t_m) / big_d
    eta = (t_m - alpha * tau) / big_d
    kappa_a = tau**2 + alpha**2 + gamma**2 / big_d
    kappa_b = 1.0 + eta**2 / big_d
    cb = stats.cxm @ b
    ca = stats.cxm.T @ a
    mp, gmp_a, gmp_b = mp_gradient(stats, a, b)
    slope = p.lambda_n * mp_reward_slope(mp)
    grad_a = (
        kappa_a * (stats.gx @ a)
        - (tau * stats.vx + alpha * cb + (gamma / big_d) * (stats.vx - eta * cb))
        - slope * gmp_a
    )
    grad_b = (
        kappa_b * (stats.gm @ b)
        - (alpha * ca + (eta / big_d) * (stats.vm - gamma * ca))
        - slope * gmp_b
    )
    return grad_a, grad_b


def projected_subgradient_norm(
    d: Dataset,
    w: AggregationWeights,
    p: PenaltyConfig,
    stats: SufficientStats | None = None,
) -> float:
    """Norm of the tangent-space projected subgradient at a solution.

    Uses the profiled partial gradient (the stationarity object of the
    profiled block scheme) plus the minimum-norm l1 subgradient on the
    unit-variance weight scale, projected onto the tangent space of the
    normalization constraints restricted to the active support.
    """
    stats = stats or SufficientStats(d)
    rx, rm = stats.aggregate_norms(np.asarray(w.a, float), np.asarray(w.b, float))
    a = np.asarray(w.a, float) / rx
    b = np.asarray(w.b, float) / rm
    ga, gb = profiled_partial_gradient(stats, a, b, p)
    sub_a = ga + p.lam_a * np.sign(a)
    sub_b = gb + p.lam_b * np.sign(b)
    za = a == 0.0
    zb = b == 0.0
    sub_a[za] = np.sign(ga[za]) * np.maximum(np.abs(ga[za]) - p.lam_a, 0.0)
    sub_b[zb] = np.sign(gb[zb]) * np.maximum(np.abs(gb[zb]) - p.lam_b, 0.0)
    g = np.concatenate([sub_a, sub_b])
    basis = tangent_space_basis(
        stats, a, b, np.flatnonzero(~za), np.flatnonzero(~zb), exclude_radial=True
    )
    if basis.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(basis.T @ g))
