import numpy as np
import pytest

from medagg.data import AggregationWeights
from medagg.errors import EmptyInput
from medagg.metrics import (
    BenchmarkRow,
    SelectionCounts,
    aggregate_replicates,
    classification_metrics,
    selection_counts,
)
from medagg.profiling import ProfiledCoefficients
from medagg.simulation import SimTruth
from medagg.solver import ConvergenceStatus, FitResult


def _fit_with(a, b, mp=0.5):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    coef = ProfiledCoefficients(1.0, 0.5, 0.5, 1.0, mp)
    return FitResult(
        weights=AggregationWeights(a, b),
        coefficients=coef,
        objective=0.0, iterations=1, converged=True,
        primal_residual_final=0.0, dual_residual_final=0.0,
        support_a=tuple(np.flatnonzero(a)), support_b=tuple(np.flatnonzero(b)),
        restarts_used=1, is_local_min=True, status=ConvergenceStatus.CONVERGED_RESIDUALS,
    )


def _truth(m=20, q=20, s=5, mp=0.5):
    a = np.zeros(m); a[:s] = 0.5
    b = np.zeros(q); b[:s] = 0.5
    return SimTruth(a_true=a, b_true=b, gamma=0.5, eta=1.0, mp_true=mp,
                    population_alpha=1.0)


def test_counts_perfect_recovery():
    t = _truth()
    f = _fit_with(t.a_true, t.b_true)
    c = selection_counts(f, t)
    assert (c.tp, c.fp, c.tn, c.fn) == (10, 0, 30, 0)
    assert c.total == 40


def test_counts_everything_selected():
    t = _truth()
    f = _fit_with(np.ones(20), np.ones(20))
    c = selection_counts(f, t)
    assert (c.tp, c.fp, c.tn, c.fn) == (10, 30, 0, 0)
    m = classification_metrics(c)
    assert m.precision == pytest.approx(0.25)
    assert m.recall == pytest.approx(1.0)


def test_counts_nothing_selected_convention():
    t = _truth()
    f = _fit_with(np.zeros(20), np.zeros(20))
    c = selection_counts(f, t)
    m = classification_metrics(c)
    assert m.precision == 0.0 and m.recall == 0.0 and m.f1 == 0.0
    assert m.empty_selection
    assert m.accuracy == pytest.approx(30 / 40)


def test_metrics_arithmetic():
    m = classification_metrics(SelectionCounts(tp=5, fp=2, tn=33, fn=0))
    assert m.precision == pytest.approx(5 / 7)
    assert m.recall == pytest.approx(1.0)
    assert m.f1 == pytest.approx(2 * (5 / 7) / (1 + 5 / 7))
    assert m.accuracy == pytest.approx(38 / 40)


def test_f1_harmonic_identity():
    m = classification_metrics(SelectionCounts(tp=3, fp=4, tn=30, fn=3))
    expected = 2 * m.precision * m.recall / (m.precision + m.recall)
    assert m.f1 == pytest.approx(expected)


def test_aggregate_single_replicate_flag():
    t = _truth()
    row = aggregate_replicates([(_fit_with(t.a_true, t.b_true, mp=0.4), t)],
                               condition="one")
    assert row.small_sample
    assert row.mp_sd == 0.0
    assert row.mp_mean == pytest.approx(0.4)


def test_aggregate_matches_direct_recomputation():
    t = _truth(mp=0.5)
    mps = [0.4, 0.55, 0.52]
    fits = [(_fit_with(t.a_true, t.b_true, mp=v), t) for v in mps]
    row = aggregate_replicates(fits, condition="cond")
    assert row.mp_mean == pytest.approx(np.mean(mps))
    assert row.mp_sd == pytest.approx(np.std(mps, ddof=1))
    assert row.abs_bias == pytest.approx(abs(np.mean(mps) - 0.5))
    assert row.precision == pytest.approx(1.0)
    assert row.accuracy == pytest.approx(1.0)


def test_aggregate_permutation_invariant():
    t = _truth()
    fits = [(_fit_with(t.a_true, t.b_true, mp=v), t) for v in (0.3, 0.5, 0.7)]
    r1 = aggregate_replicates(fits, condition="c")
    r2 = aggregate_replicates(list(reversed(fits)), condition="c")
    assert r1.mp_mean == r2.mp_mean and r1.mp_sd == r2.mp_sd


def test_aggregate_empty_raises():
    with pytest.raises(EmptyInput):
        aggregate_replicates([])
