"""Penalty selection by K-fold cross-validation over a grid.

The held-out criterion is the unpenalized profiled loss (all three SSR
terms with the variance-inflation factor) evaluated with training-fitted
weights and coefficients on the test fold, aggregates renormalized per
fold.  A Y-prediction-only MSE is available as an alternative criterion.
Standardization statistics come from the training fold unless global
standardization is requested for benchmark parity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, PenaltyConfig, standardize_columns, validate_dataset
from .errors import AllCellsFailed, InvalidFoldCount, MedaggError
from .profiling import SufficientStats
from .solver import FitResult, SolverOptions, fit

_ZERO = 1e-12


@dataclass(frozen=True)
class CvGrid:
    """Candidate penalty values and fold configuration."""

    lambda_a_values: tuple = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5)
    lambda_b_values: tuple = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5)
    lambda_n_values: tuple = (0.02, 0.05, 0.08, 0.1, 0.15)
    k_folds: int = 5
    fold_seed: int = 0

    def __post_init__(self):
        for name in ("lambda_a_values", "lambda_b_values", "lambda_n_values"):
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(v < 0 for v in vals):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, tuple(sorted(vals)))
        if self.k_folds < 2:
            raise InvalidFoldCount("k_folds must be >= 2")


@dataclass(frozen=True)
class CvReport:
    """Grid evaluation summary and the selected penalty triple."""

    lambda_a_values: tuple
    lambda_b_values: tuple
    lambda_n_values: tuple
    mean_loss: np.ndarray       # (len_a, len_b, len_n)
    se_loss: np.ndarray
    selected: tuple             # (lambda_a, lambda_b, lambda_n)
    selected_index: tuple
    selected_fold_losses: tuple
    n_failed_cells: int = 0


def fold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Disjoint shuffled folds covering range(n), sizes differing by <= 1."""
    if not 2 <= k <= n:
        raise InvalidFoldCount(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def _subset(d: Dataset, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.asarray(d.X)[idx], np.asarray(d.M)[idx], np.asarray(d.Y)[idx]


def _apply_standardization(X, M, Y, mx, sx, mm, sm, my):
    return (X - mx) / sx, (M - mm) / sm, Y - my


def cv_loss(
    train: Dataset,
    test: Dataset,
    p: PenaltyConfig,
    opts: SolverOptions,
    criterion: str = "profiled",
    stats: SufficientStats | None = None,
) -> float:
    """Fit on the training fold and score on the test fold.

    Returns +inf when the fit fails or the test aggregates degenerate.
    """
    try:
        fitted = fit(train, p, opts, stats=stats)
    except MedaggError:
        return float("inf")
    return score_fit(fitted, test, criterion=criterion)


def score_fit(fitted: FitResult, test: Dataset, criterion: str = "profiled") -> float:
    """Held-out loss of a fitted model on a test dataset.

    "profiled": the unpenalized profiled loss (three SSR terms with the
    training variance-inflation factor) with test aggregates rescaled to
    unit sample variance and the training coefficients carried across via
    the matching scale factors.  "y_mse": mean squared error of the
    two-regressor Y fit under the same rescaling.
    """
    X_t, M_t, Y_t = np.asarray(test.X), np.asarray(test.M), np.asarray(test.Y)
    n_t = Y_t.shape[0]
    a = np.asarray(fitted.weights.a)
    b = np.asarray(fitted.weights.b)
    coef = fitted.coefficients
    xa = X_t @ a
    mb = M_t @ b
    # reported weights have unit-Euclidean-norm training aggregates, i.e.
    # training aggregate sd 1/sqrt(n_train); the coefficients apply to the
    # unit-variance training copies sqrt(n_train) * (a, b).  The frame
    # factors below are the test-fold sds of those copies.
    hx = float(np.linalg.norm(xa)) / np.sqrt(n_t) * np.sqrt(fitted.n_obs)
    hm = float(np.linalg.norm(mb)) / np.sqrt(n_t) * np.sqrt(fitted.n_obs)
    if hx < _ZERO or hm < _ZERO:
        return float("inf")
    x_star = xa * np.sqrt(fitted.n_obs) / hx   # unit sample variance on test
    m_star = mb * np.sqrt(fitted.n_obs) / hm
    tau_f = coef.tau_hat * hx
    alpha_f = coef.alpha_hat * hx / hm
    gamma_f = coef.gamma_hat * hx
    eta_f = coef.eta_hat * hm
    big_d = 1.0 - coef.alpha_hat**2
    if big_d < 1e-12:
        return float("inf")
    r3 = Y_t - gamma_f * x_star - eta_f * m_star
    if criterion == "y_mse":
        return float(r3 @ r3) / n_t
    r1 = Y_t - tau_f * x_star
    r2 = m_star - alpha_f * x_star
    return (float(r1 @ r1) + float(r2 @ r2) + float(r3 @ r3) / big_d) / (2.0 * n_t)


def cv_select(
    d: Dataset,
    grid: CvGrid,
    opts: SolverOptions | None = None,
    criterion: str = "profiled",
    global_standardization: bool = False,
    cv_restarts: int | None = 2,
    cv_max_iter: int | None = None,
) -> CvReport:
    """Evaluate every grid cell over all folds; return the minimizing cell.

    Ties break toward larger lambda_a + lambda_b, then larger lambda_a.
    cv_restarts / cv_max_iter lighten the per-cell fits (the full options
    apply to the final refit done by the caller); pass None to reuse opts.
    """
    opts = opts or SolverOptions()
    folds = fold_split(d.n, grid.k_folds, grid.fold_seed)
    la_vals, lb_vals, ln_vals = (
        grid.lambda_a_values, grid.lambda_b_values, grid.lambda_n_values
    )
    shape = (len(la_vals), len(lb_vals), len(ln_vals))
    losses = np.full(shape + (grid.k_folds,), np.inf)

    inner = SolverOptions(
        max_iter=cv_max_iter or opts.max_iter,
        eps_pri=opts.eps_pri,
        eps_dual=opts.eps_dual,
        rel_obj_tol=opts.rel_obj_tol,
        rel_obj_patience=opts.rel_obj_patience,
        restarts=cv_restarts or opts.restarts,
        seed=opts.seed,
        hessian_check=False,
        fd_step=opts.fd_step,
    )

    all_idx = np.arange(d.n)
    for kf, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_idx, test_idx)
        X_tr, M_tr, Y_tr = _subset(d, train_idx)
        X_te, M_te, Y_te = _subset(d, test_idx)
        if not global_standardization:
            mx, sx = X_tr.mean(axis=0), X_tr.std(axis=0, ddof=1)
            mm, sm = M_tr.mean(axis=0), M_tr.std(axis=0, ddof=1)
            my = Y_tr.mean()
            if np.any(sx < _ZERO) or np.any(sm < _ZERO):
                continue
            X_tr, M_tr, Y_tr = _apply_standardization(X_tr, M_tr, Y_tr, mx, sx, mm, sm, my)
            X_te, M_te, Y_te = _apply_standardization(X_te, M_te, Y_te, mx, sx, mm, sm, my)
        try:
            train = validate_dataset(X_tr, M_tr, Y_tr)
            test = validate_dataset(X_te, M_te, Y_te)
        except MedaggError:
            continue
        stats = SufficientStats(train)
        for ia, la in enumerate(la_vals):
            for ib, lb in enumerate(lb_vals):
                for in_, ln in enumerate(ln_vals):
                    p = PenaltyConfig(lambda_a=la, lambda_b=lb, lambda_n=ln)
                    try:
                        fitted = fit(train, p, inner, stats=stats)
                        losses[ia, ib, in_, kf] = score_fit(fitted, test, criterion)
                    except MedaggError:
                        pass

    mean_loss = losses.mean(axis=-1)
    with np.errstate(invalid="ignore"):
        se_loss = losses.std(axis=-1, ddof=1) / np.sqrt(grid.k_folds)
    finite = np.isfinite(mean_loss)
    n_failed = int(np.size(mean_loss) - np.count_nonzero(finite))
    if not finite.any():
        raise AllCellsFailed("every grid cell failed on every fold")

    best = np.inf
    best_key = None
    best_idx = None
    for ia, la in enumerate(la_vals):
        for ib, lb in enumerate(lb_vals):
            for in_, ln in enumerate(ln_vals):
                val = mean_loss[ia, ib, in_]
                if not np.isfinite(val):
                    continue
                # tie-break: larger la+lb, then larger la
                key = (val, -(la + lb), -la)
                if best_key is None or key < best_key:
                    best_key = key
                    best = val
                    best_idx = (ia, ib, in_)
    ia, ib, in_ = best_idx
    return CvReport(
        lambda_a_values=la_vals,
        lambda_b_values=lb_vals,
        lambda_n_values=ln_vals,
        mean_loss=mean_loss,
        se_loss=se_loss,
        selected=(la_vals[ia], lb_vals[ib], ln_vals[in_]),
        selected_index=best_idx,
        selected_fold_losses=tuple(losses[ia, ib, in_]),
        n_failed_cells=n_failed,
    )
