"""Replicated simulation benchmarks with optional per-replicate tuning.

Each replicate draws a dataset with seed = base_seed + replicate index,
standardizes it, optionally runs K-fold cross-validation to pick the
penalties, refits with the full solver options, and scores selection and
mediation-proportion accuracy against the generating truth.  Replicates
run in a process pool; results are reduced in replicate order so output
is independent of scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .data import PenaltyConfig, standardize_columns
from .errors import MedaggError
from .metrics import BenchmarkRow, aggregate_replicates
from .profiling import SufficientStats
from .simulation import SimConfig, generate_dataset
from .solver import SolverOptions, fit
from .tuning import CvGrid, cv_select

WORKERS_ENV = "MEDAGG_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class BenchCondition:
    """One benchmark scenario: a data-generating config plus penalties."""

    label: str
    sim: SimConfig
    penalties: PenaltyConfig | None = None  # fixed penalties; None -> use grid
    grid: CvGrid | None = None

    def __post_init__(self):
        if (self.penalties is None) == (self.grid is None):
            raise ValueError("provide exactly one of penalties or grid")


@dataclass
class ReplicateOutcome:
    index: int
    ok: bool
    fit: object = None
    truth: object = None
    selected: tuple | None = None
    error: str = ""


def run_replicate(
    condition: BenchCondition,
    replicate_index: int,
    base_seed: int,
    opts: SolverOptions,
    cv_restarts: int = 2,
    cv_max_iter: int = 200,
) -> ReplicateOutcome:
    """Generate, tune (optionally), fit and score a single replicate."""
    seed = base_seed + replicate_index
    sim = replace(condition.sim, seed=seed)
    try:
        raw, truth = generate_dataset(sim)
        data = standardize_columns(raw)
        run_opts = replace(opts, seed=seed)
        selected = None
        if condition.grid is not None:
            grid = replace(condition.grid, fold_seed=seed)
            report = cv_select(
                data, grid, run_opts,
                cv_restarts=cv_restarts, cv_max_iter=cv_max_iter,
            )
            selected = report.selected
            pen = PenaltyConfig(lambda_a=selected[0], lambda_b=selected[1],
                                lambda_n=selected[2])
        else:
            pen = condition.penalties
        stats = SufficientStats(data)
        result = fit(data, pen, run_opts, stats=stats)
        return ReplicateOutcome(index=replicate_index, ok=True, fit=result,
                                truth=truth, selected=selected)
    except MedaggError as exc:
        return ReplicateOutcome(index=replicate_index, ok=False,
                                error=f"{type(exc).__name__}: {exc}")


def _worker(args):
    condition, idx, base_seed, opts, cv_restarts, cv_max_iter = args
    return run_replicate(condition, idx, base_seed, opts, cv_restarts, cv_max_iter)


def run_condition(
    condition: BenchCondition,
    replicates: int,
    base_seed: int = 0,
    opts: SolverOptions | None = None,
    workers: int | None = None,
    cv_restarts: int = 2,
    cv_max_iter: int = 200,
) -> tuple[BenchmarkRow, list[ReplicateOutcome]]:
    """Run all replicates of one condition and aggregate the survivors."""
    opts = opts or SolverOptions()
    workers = workers or default_workers()
    tasks = [
        (condition, i, base_seed, opts, cv_restarts, cv_max_iter)
        for i in range(replicates)
    ]
    if workers > 1 and replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_worker, tasks, chunksize=1))
    else:
        outcomes = [_worker(t) for t in tasks]
    outcomes.sort(key=lambda o: o.index)
    good = [(o.fit, o.truth) for o in outcomes if o.ok]
    failed = sum(1 for o in outcomes if not o.ok)
    if not good:
        errors = {o.error for o in outcomes if not o.ok}
        raise MedaggError(
            f"every replicate of condition {condition.label!r} failed: {sorted(errors)}"
        )
    row = aggregate_replicates(good, condition=condition.label, n_failed=failed)
    return row, outcomes


def run_benchmark(
    conditions: list[BenchCondition],
    replicates: int,
    base_seed: int = 0,
    opts: SolverOptions | None = None,
    workers: int | None = None,
    cv_restarts: int = 2,
    cv_max_iter: int = 200,
):
    """Run several conditions; returns (rows, per-condition outcomes)."""
    rows = []
    all_outcomes = []
    for cond in conditions:
        row, outcomes = run_condition(
            cond, replicates, base_seed, opts, workers, cv_restarts, cv_max_iter
        )
        rows.append(row)
        all_outcomes.append(outcomes)
    return rows, all_outcomes
