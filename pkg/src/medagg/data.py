"""Core data types, normalization conventions, and validation.

The estimator operates on an exposure matrix X (n x m), a mediator matrix
M (n x q) and an outcome vector Y (n).  Columns of X and M are standardized
to mean zero / unit sample standard deviation; Y is centered only.  Weight
vectors (a, b) define the latent aggregates X a and M b; two normalization
conventions are supported and interconvertible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFiniteEntry,
    RankDeficientCovariates,
    ZeroAggregate,
    ZeroVarianceColumn,
)

# sd below this (after centering) marks a column as degenerate
ZERO_VARIANCE_SD = 1e-12


class Normalization(enum.Enum):
    """Scaling convention for aggregation weights."""

    AGGREGATE_UNIT = "aggregate_unit"  # ||X a||_2 = ||M b||_2 = 1
    WEIGHT_UNIT = "weight_unit"        # ||a||_2 = ||b||_2 = 1


@dataclass(frozen=True)
class Dataset:
    """Validated (X, M, Y) triple; arrays are read-only."""

    X: np.ndarray
    M: np.ndarray
    Y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.M.shape[1]


@dataclass(frozen=True)
class AggregationWeights:
    """Weight pair (a, b) under a declared normalization convention."""

    a: np.ndarray
    b: np.ndarray
    normalization: Normalization = Normalization.AGGREGATE_UNIT


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty and admissibility parameters of the fitting objective.

    lambda_a / lambda_b are the l1 penalty levels on the weight vectors,
    lambda_n the mediation-proportion reward weight, rho the ADMM
    augmentation parameter.  r0 and delta bound the admissible region
    (tau >= r0, 1 - alpha^2 >= delta).  c_lambda rescales both l1
    penalties multiplicatively.
    """

    lambda_a: float
    lambda_b: float
    lambda_n: float
    rho: float = 1.0
    r0: float = 1e-3
    delta: float = 1e-2
    c_lambda: float = 1.0

    def __post_init__(self):
        if self.lambda_a < 0 or self.lambda_b < 0 or self.lambda_n < 0:
            raise ValueError("penalty weights must be nonnegative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.c_lambda <= 0:
            raise ValueError("c_lambda must be positive")

    @property
    def lam_a(self) -> float:
        """Effective l1 level on a (c_lambda applied)."""
        return self.lambda_a * self.c_lambda

    @property
    def lam_b(self) -> float:
        """Effective l1 level on b (c_lambda applied)."""
        return self.lambda_b * self.c_lambda


def _readonly(x: np.ndarray) -> np.ndarray:
    out = np.array(x, dtype=float, copy=True, order="C")
    out.flags.writeable = False
    return out


def validate_dataset(X, M, Y) -> Dataset:
    """Check shapes, finiteness and column variance; returns a Dataset.

    Values are not modified.  Raises DimensionMismatch, NonFiniteEntry or
    ZeroVarianceColumn (naming the offending column).
    """
    X = np.asarray(X, dtype=float)
    M = np.asarray(M, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.ndim != 2 or M.ndim != 2:
        raise DimensionMismatch("X and M must be 2-d matrices")
    n = X.shape[0]
    if M.shape[0] != n or Y.shape[0] != n:
        raise DimensionMismatch(
            f"row counts differ: X has {n}, M has {M.shape[0]}, Y has {Y.shape[0]}"
        )
    if n < 3:
        raise DimensionMismatch(f"need at least 3 rows, got {n}")
    if X.shape[1] < 1 or M.shape[1] < 1:
        raise DimensionMismatch("X and M must each have at least one column")
    for name, arr in (("X", X), ("M", M), ("Y", Y)):
        if not np.all(np.isfinite(arr)):
            idx = np.argwhere(~np.isfinite(arr))[0]
            raise NonFiniteEntry(f"non-finite entry in {name} at index {tuple(idx)}")
    for name, arr in (("X", X), ("M", M)):
        sds = arr.std(axis=0, ddof=1)
        bad = np.flatnonzero(sds < ZERO_VARIANCE_SD)
        if bad.size:
            raise ZeroVarianceColumn(f"column {bad[0]} of {name} has zero variance")
    return Dataset(X=_readonly(X), M=_readonly(M), Y=_readonly(Y))


def standardize_columns(d: Dataset) -> Dataset:
    """Center and scale each column of X, M to unit sample sd; center Y.

    Uses the n-1 divisor.  Idempotent to floating-point precision.
    """
    def _std(arr, name):
        centered = arr - arr.mean(axis=0)
        sds = centered.std(axis=0, ddof=1)
        bad = np.flatnonzero(sds < ZERO_VARIANCE_SD)
        if bad.size:
            raise ZeroVarianceColumn(f"column {bad[0]} of {name} has zero variance")
        return centered / sds

    X = _std(np.asarray(d.X), "X")
    M = _std(np.asarray(d.M), "M")
    Y = np.asarray(d.Y) - d.Y.mean()
    return Dataset(X=_readonly(X), M=_readonly(M), Y=_readonly(Y))


def residualize_covariates(d: Dataset, C) -> Dataset:
    """Replace X, M columns and Y by their OLS residuals on [1, C].

    An intercept column is always included, so means are removed even when
    C omits one.  Raises RankDeficientCovariates if [1, C] is column-rank
    deficient.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != d.n:
        raise DimensionMismatch(
            f"covariate rows ({C.shape[0]}) do not match dataset rows ({d.n})"
        )
    design = np.column_stack([np.ones(d.n), C])
    if design.shape[1] >= d.n:
        raise RankDeficientCovariates("more covariate columns than observations")
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankDeficientCovariates(
            f"covariate design has rank {rank} < {design.shape[1]} columns"
        )
    # residual maker via QR: resid = Z - Q (Q^T Z)
    Q, _ = np.linalg.qr(design)

    def _resid(Z):
        Z = np.asarray(Z)
        return Z - Q @ (Q.T @ Z)

    return Dataset(
        X=_readonly(_resid(d.X)),
        M=_readonly(_resid(d.M)),
        Y=_readonly(_resid(d.Y)),
    )


def convert_normalization(
    w: AggregationWeights, d: Dataset, target: Normalization
) -> AggregationWeights:
    """Rescale (a, b) between the aggregate-unit and weight-unit conventions.

    The conversion factors are h_a = ||X a|| / ||a|| and h_b = ||M b|| / ||b||;
    mediation quantities are invariant under the change.
    """
    if w.normalization is target:
        return w
    a = np.asarray(w.a, dtype=float)
    b = np.asarray(w.b, dtype=float)
    if target is Normalization.AGGREGATE_UNIT:
        sa = np.linalg.norm(d.X @ a)
        sb = np.linalg.norm(d.M @ b)
    else:
        sa = np.linalg.norm(a)
        sb = np.linalg.norm(b)
    if sa < 1e-12 or sb < 1e-12:
        raise ZeroAggregate("cannot normalize a zero weight vector")
    return AggregationWeights(a=a / sa, b=b / sb, normalization=target)


def with_weights(w: AggregationWeights, a=None, b=None) -> AggregationWeights:
    """Copy of w with either vector replaced."""
    return replace(
        w,
        a=w.a if a is None else np.asarray(a, dtype=float),
        b=w.b if b is None else np.asarray(b, dtype=float),
    )
