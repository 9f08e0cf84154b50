"""CSV and JSON input/output with schema validation.

CSV files carry a header row with column labels (gene or region names in
the intended workflow) and a rectangular numeric body.  JSON artifacts
carry a schema_version field and validate against the schemas shipped
with the package.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError, RaggedRows

SCHEMA_VERSION = "1"


def load_csv_matrix(path) -> tuple[np.ndarray, list[str]]:
    """Read a header+numeric CSV into (matrix, column names).

    Raises ParseError (naming the first offending cell) or RaggedRows.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n\r") for ln in fh if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    ncol = len(header)
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != ncol:
            raise RaggedRows(f"{path}: row {i} has {len(cells)} cells, expected {ncol}")
        row = np.empty(ncol)
        for j, cell in enumerate(cells):
            try:
                row[j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: cannot parse cell at row {i}, column {j + 1} ({cell!r})"
                ) from None
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.vstack(rows), header


def load_csv_vector(path) -> tuple[np.ndarray, str]:
    mat, names = load_csv_matrix(path)
    if mat.shape[1] != 1:
        raise ParseError(f"{path}: expected a single column, found {mat.shape[1]}")
    return mat[:, 0], names[0]


def save_csv_matrix(path, matrix: np.ndarray, names: list[str]) -> None:
    """Write a matrix with 17-significant-digit decimals (bit-exact round trip)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] == 1 and len(names) != matrix.shape[1]:
        matrix = matrix.T
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in matrix:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def write_json(path, payload: dict, schema: str | None = None) -> None:
    """Serialize deterministically (sorted keys, shortest-roundtrip floats)."""
    payload = dict(payload)
    payload.setdefault("schema_version", SCHEMA_VERSION)
    if schema is not None:
        validate_payload(payload, schema)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def load_schema(name: str) -> dict:
    text = resources.files("medagg.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate_payload(payload: dict, schema_name: str) -> None:
    import jsonschema

    jsonschema.validate(payload, load_schema(schema_name))


def _float_list(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def fit_result_payload(result, x_names=None, m_names=None) -> dict:
    """JSON-ready dictionary for a FitResult."""
    a = np.asarray(result.weights.a)
    b = np.asarray(result.weights.b)
    x_names = list(x_names) if x_names else [f"x{i+1}" for i in range(a.shape[0])]
    m_names = list(m_names) if m_names else [f"m{j+1}" for j in range(b.shape[0])]
    coef = result.coefficients
    return {
        "schema_version": SCHEMA_VERSION,
        "weights": {
            "a": _float_list(a),
            "b": _float_list(b),
            "normalization": result.weights.normalization.value,
            "x_names": x_names,
            "m_names": m_names,
        },
        "coefficients": {
            "tau_hat": float(coef.tau_hat),
            "alpha_hat": float(coef.alpha_hat),
            "gamma_hat": float(coef.gamma_hat),
            "eta_hat": float(coef.eta_hat),
            "mp_hat": float(coef.mp_hat),
        },
        "mediation_proportion": float(coef.mp_hat),
        "objective": float(result.objective),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "status": result.status.value,
        "primal_residual_final": float(result.primal_residual_final),
        "dual_residual_final": float(result.dual_residual_final),
        "support_a": [x_names[i] for i in result.support_a],
        "support_b": [m_names[j] for j in result.support_b],
        "support_a_indices": [int(i) for i in result.support_a],
        "support_b_indices": [int(j) for j in result.support_b],
        "restarts_used": int(result.restarts_used),
        "restart_objectives": _float_list(result.restart_objectives),
        "is_local_min": bool(result.is_local_min),
        "min_eigenvalue": float(result.min_eigenvalue),
        "max_descent_gap": float(result.max_descent_gap),
    }


def cv_report_payload(report) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "lambda_a_values": _float_list(report.lambda_a_values),
        "lambda_b_values": _float_list(report.lambda_b_values),
        "lambda_n_values": _float_list(report.lambda_n_values),
        "mean_loss": [
            [[None if not np.isfinite(v) else float(v) for v in row] for row in plane]
            for plane in np.asarray(report.mean_loss)
        ],
        "selected": {
            "lambda_a": float(report.selected[0]),
            "lambda_b": float(report.selected[1]),
            "lambda_n": float(report.selected[2]),
        },
        "selected_fold_losses": [
            None if not np.isfinite(v) else float(v) for v in report.selected_fold_losses
        ],
        "n_failed_cells": int(report.n_failed_cells),
    }


def benchmark_payload(rows, meta: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "meta": meta,
        "rows": [
            {
                "condition": r.condition,
                "n_replicates": int(r.n_replicates),
                "n_failed": int(r.n_failed),
                "mp_mean": float(r.mp_mean),
                "mp_sd": float(r.mp_sd),
                "abs_bias": None if not np.isfinite(r.abs_bias) else float(r.abs_bias),
                "precision": float(r.precision),
                "recall": float(r.recall),
                "f1": float(r.f1),
                "accuracy": float(r.accuracy),
                "small_sample": bool(r.small_sample),
            }
            for r in rows
        ],
    }


BENCH_TSV_COLUMNS = [
    "condition", "m", "q", "rho_x", "rho_m", "regime", "n_replicates", "n_failed",
    "mp_mean", "mp_sd", "abs_bias", "precision", "recall", "f1", "accuracy",
]


def benchmark_tsv(rows, conditions) -> str:
    """Benchmark table in the published column order (TSV)."""
    lines = ["\t".join(BENCH_TSV_COLUMNS)]
    for r, cfg in zip(rows, conditions):
        vals = [
            r.condition, cfg.m, cfg.q, cfg.rho_x, cfg.rho_m, cfg.regime.value,
            r.n_replicates, r.n_failed,
            format(r.mp_mean, ".6f"), format(r.mp_sd, ".6f"),
            "nan" if not np.isfinite(r.abs_bias) else format(r.abs_bias, ".6f"),
            format(r.precision, ".6f"), format(r.recall, ".6f"),
            format(r.f1, ".6f"), format(r.accuracy, ".6f"),
        ]
        lines.append("\t".join(str(v) for v in vals))
    return "\n".join(lines) + "\n"
