"""Command-line interface: fit, cv, simulate, benchmark, verify."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, io as mio
from .data import PenaltyConfig, residualize_covariates, standardize_columns, validate_dataset
from .errors import (
    ConfigError,
    MedaggError,
    NoAdmissibleSolution,
    ParseError,
    RaggedRows,
)
from .oracle import (
    finite_diff_grad,
    grid_search_min,
    identify_from_moments,
    rank_one_moments,
    ssr_objective_value,
)
from .profiling import SufficientStats, smooth_gradient
from .simulation import Misspecify, Regime, SimConfig, generate_dataset, population_mp
from .solver import SolverOptions, fit
from .tuning import CvGrid, cv_select

# stable exit codes (documented in the README)
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_IO = 5
EXIT_INTERNAL = 70


def _parse_floats(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"cannot parse float list {text!r}") from exc


def _load_dataset(args):
    for name in ("x", "m", "y"):
        path = getattr(args, name)
        if path is None:
            raise ConfigError(f"--{name} is required")
        if not Path(path).exists():
            raise ConfigError(f"--{name} path does not exist: {path}")
    X, x_names = mio.load_csv_matrix(args.x)
    M, m_names = mio.load_csv_matrix(args.m)
    Y, _ = mio.load_csv_vector(args.y)
    d = validate_dataset(X, M, Y)
    if args.c:
        if not Path(args.c).exists():
            raise ConfigError(f"--c path does not exist: {args.c}")
        C, _ = mio.load_csv_matrix(args.c)
        d = residualize_covariates(d, C)
    return standardize_columns(d), x_names, m_names


def _solver_options(args) -> SolverOptions:
    return SolverOptions(
        max_iter=args.max_iter,
        eps_pri=args.eps_pri,
        eps_dual=args.eps_dual,
        restarts=args.restarts,
        seed=args.seed,
        hessian_check=not args.no_hessian_check,
    )


def _grid_from_args(args) -> CvGrid:
    return CvGrid(
        lambda_a_values=_parse_floats(args.grid_a),
        lambda_b_values=_parse_floats(args.grid_b),
        lambda_n_values=_parse_floats(args.grid_n),
        k_folds=args.folds,
        fold_seed=args.seed,
    )


def _cmd_fit(args) -> int:
    data, x_names, m_names = _load_dataset(args)
    opts = _solver_options(args)
    cv_payload = None
    if args.cv:
        report = cv_select(data, _grid_from_args(args), opts,
                           cv_restarts=args.cv_restarts, cv_max_iter=args.cv_max_iter)
        la, lb, ln = report.selected
        cv_payload = mio.cv_report_payload(report)
    else:
        la, lb, ln = args.lambda_a, args.lambda_b, args.lambda_n
    pen = PenaltyConfig(lambda_a=la, lambda_b=lb, lambda_n=ln, rho=args.rho,
                        c_lambda=args.c_lambda)
    result = fit(data, pen, opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = mio.fit_result_payload(result, x_names, m_names)
    if cv_payload is not None:
        payload["cv"] = cv_payload
    mio.write_json(out / "fit_result.json", payload, schema="fit_result")
    coef = result.coefficients
    print(f"converged: {result.converged} ({result.status.value}, "
          f"{result.iterations} iterations)")
    print(f"penalties: lambda_a={la} lambda_b={lb} lambda_n={ln}")
    print(f"mediation proportion: {coef.mp_hat:.4f}")
    print(f"tau={coef.tau_hat:.4f} alpha={coef.alpha_hat:.4f} "
          f"gamma={coef.gamma_hat:.4f} eta={coef.eta_hat:.4f}")
    print(f"selected exposures ({len(result.support_a)}): "
          + ", ".join(x_names[i] for i in result.support_a))
    print(f"selected mediators ({len(result.support_b)}): "
          + ", ".join(m_names[j] for j in result.support_b))
    print(f"wrote {out / 'fit_result.json'}")
    return EXIT_OK


def _cmd_cv(args) -> int:
    data, _, _ = _load_dataset(args)
    opts = _solver_options(args)
    report = cv_select(data, _grid_from_args(args), opts,
                       cv_restarts=args.cv_restarts, cv_max_iter=args.cv_max_iter)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mio.write_json(out / "cv_report.json", mio.cv_report_payload(report), schema="cv_report")
    la, lb, ln = report.selected
    print(f"selected: lambda_a={la} lambda_b={lb} lambda_n={ln}")
    print(f"wrote {out / 'cv_report.json'}")
    return EXIT_OK


def _sim_config(args) -> SimConfig:
    return SimConfig(
        n=args.n, m=args.m, q=args.q,
        rho_x=args.rho_x, rho_m=args.rho_m,
        c=args.c_signal, s=args.s, sigma_y2=args.sigma_y2,
        regime=Regime(args.regime), target_mp=args.target_mp,
        seed=args.seed, misspecify=Misspecify(args.misspecify),
    )


def _cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    data, truth = generate_dataset(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x_names = [f"x{i+1}" for i in range(cfg.m)]
    m_names = [f"m{j+1}" for j in range(cfg.q)]
    mio.save_csv_matrix(out / "X.csv", data.X, x_names)
    mio.save_csv_matrix(out / "M.csv", data.M, m_names)
    mio.save_csv_matrix(out / "Y.csv", np.asarray(data.Y)[:, None], ["y"])
    meta = {
        "schema_version": mio.SCHEMA_VERSION,
        "config": {
            "n": cfg.n, "m": cfg.m, "q": cfg.q,
            "rho_x": cfg.rho_x, "rho_m": cfg.rho_m,
            "c": cfg.c, "s": cfg.s, "sigma_y2": cfg.sigma_y2,
            "regime": cfg.regime.value, "target_mp": cfg.target_mp,
            "L_value": cfg.L_value, "seed": cfg.seed,
            "misspecify": cfg.misspecify.value,
        },
        "truth": {
            "a_true": [float(v) for v in truth.a_true],
            "b_true": [float(v) for v in truth.b_true],
            "gamma": float(truth.gamma),
            "eta": float(truth.eta),
            "mp_true": None if not np.isfinite(truth.mp_true) else float(truth.mp_true),
            "population_alpha": float(truth.population_alpha),
        },
    }
    mio.write_json(out / "truth.json", meta, schema="sim_meta")
    print(f"wrote X.csv, M.csv, Y.csv, truth.json to {out}")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    cfg = _sim_config(args)
    if args.grid:
        cond = bench.BenchCondition(label=args.label, sim=cfg, grid=_grid_from_args(args))
    else:
        pen = PenaltyConfig(lambda_a=args.lambda_a, lambda_b=args.lambda_b,
                            lambda_n=args.lambda_n, rho=args.rho, c_lambda=args.c_lambda)
        cond = bench.BenchCondition(label=args.label, sim=cfg, penalties=pen)
    opts = _solver_options(args)
    row, outcomes = bench.run_condition(
        cond, args.replicates, base_seed=args.seed, opts=opts,
        workers=args.workers, cv_restarts=args.cv_restarts, cv_max_iter=args.cv_max_iter,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "label": args.label, "replicates": args.replicates, "seed": args.seed,
        "tuning": "cv" if args.grid else "fixed",
    }
    formats = set(args.format.split(","))
    if "json" in formats:
        payload = mio.benchmark_payload([row], meta)
        payload["replicate_results"] = [
            {
                "index": o.index,
                "ok": o.ok,
                "error": o.error,
                "mp_hat": float(o.fit.coefficients.mp_hat) if o.ok else None,
                "selected": list(o.selected) if o.selected else None,
                "support_a": [int(i) for i in o.fit.support_a] if o.ok else None,
                "support_b": [int(j) for j in o.fit.support_b] if o.ok else None,
            }
            for o in outcomes
        ]
        mio.write_json(out / "benchmark.json", payload, schema="benchmark")
    if "tsv" in formats:
        (out / "benchmark.tsv").write_text(mio.benchmark_tsv([row], [cfg]))
    print(f"{row.condition}: MP {row.mp_mean:.4f} ({row.mp_sd:.4f})  "
          f"bias {row.abs_bias:.4f}  precision {row.precision:.4f}  "
          f"recall {row.recall:.4f}  f1 {row.f1:.4f}  accuracy {row.accuracy:.4f}  "
          f"[{row.n_replicates} replicates, {row.n_failed} failed]")
    print(f"wrote outputs to {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    checks = []

    # finite differences against the analytic smooth gradient
    from .data import validate_dataset as _vd
    n, m, q = 60, 3, 3
    X = rng.normal(size=(n, m))
    M = X @ rng.normal(size=(m, q)) * 0.4 + rng.normal(size=(n, q))
    Y = X @ rng.normal(size=m) * 0.3 + M @ rng.normal(size=q) * 0.4 + rng.normal(size=n)
    data = standardize_columns(_vd(X, M, Y))
    stats = SufficientStats(data)
    a = rng.normal(size=m); b = rng.normal(size=q)
    ga, gb = smooth_gradient(stats, a, b, 0.0)
    x0 = np.concatenate([a, b])
    g_fd = finite_diff_grad(lambda x: ssr_objective_value(stats, x[:m], x[m:]), x0, 1e-6)
    err = max(np.abs(ga - g_fd[:m]).max(), np.abs(gb - g_fd[m:]).max())
    checks.append(("gradient_check", err < 1e-6, f"max abs error {err:.2e}"))

    # small-instance exhaustive search versus the solver
    n2 = 50
    X2 = rng.normal(size=(n2, 2))
    M2 = X2 @ rng.normal(size=(2, 2)) * 0.5 + rng.normal(size=(n2, 2))
    Y2 = X2 @ rng.normal(size=2) * 0.4 + M2 @ rng.normal(size=2) * 0.5 + rng.normal(size=n2)
    d2 = standardize_columns(_vd(X2, M2, Y2))
    pen = PenaltyConfig(lambda_a=0.1, lambda_b=0.1, lambda_n=0.1)
    _, oracle_obj = grid_search_min(d2, pen, resolution=360)
    res = fit(d2, pen, SolverOptions(restarts=10, seed=args.seed))
    gap = res.objective - oracle_obj
    checks.append(("grid_oracle", gap <= 1e-3, f"objective gap {gap:.2e}"))

    # identification round trip on analytic moments
    sxx = np.eye(4) + 0.25
    a0 = np.array([1.0, -0.5, 0.0, 0.25]); b0 = np.array([0.5, 1.0, 0.0])
    se = np.eye(3) * 0.8 + 0.1
    sxm, sxy, smy, smm = rank_one_moments(sxx, a0, b0, 0.9, 0.3, -0.6, se)
    ident = identify_from_moments(sxm, sxy, smy, sxx, smm)
    da = min(np.linalg.norm(ident.a_dir - a0 / np.linalg.norm(a0)),
             np.linalg.norm(ident.a_dir + a0 / np.linalg.norm(a0)))
    db = min(np.linalg.norm(ident.b_dir - b0 / np.linalg.norm(b0)),
             np.linalg.norm(ident.b_dir + b0 / np.linalg.norm(b0)))
    checks.append(("identifiability", max(da, db) < 1e-8,
                   f"direction errors {da:.2e}, {db:.2e}"))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": mio.SCHEMA_VERSION,
        "all_passed": all(ok for _, ok, _ in checks),
        "checks": [{"name": nm, "passed": bool(ok), "detail": detail}
                   for nm, ok, detail in checks],
    }
    mio.write_json(out / "verify.json", payload, schema="verify")
    for nm, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {nm}: {detail}")
    return EXIT_OK if payload["all_passed"] else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medagg",
        description="Sparse aggregation-direction estimation for multi-exposure, "
                    "multi-mediator mediation analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="medagg_out")
        sp.add_argument("--restarts", type=int, default=10)
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--eps-pri", type=float, default=1e-4)
        sp.add_argument("--eps-dual", type=float, default=1e-4)
        sp.add_argument("--rho", type=float, default=1.0)
        sp.add_argument("--c-lambda", type=float, default=1.0)
        sp.add_argument("--no-hessian-check", action="store_true")

    def add_data(sp):
        sp.add_argument("--x", help="exposure CSV (n rows, m columns, header)")
        sp.add_argument("--m", help="mediator CSV (n rows, q columns, header)")
        sp.add_argument("--y", help="outcome CSV (n rows, single column, header)")
        sp.add_argument("--c", help="optional covariate CSV", default=None)

    def add_penalties(sp):
        sp.add_argument("--lambda-a", type=float, default=0.1)
        sp.add_argument("--lambda-b", type=float, default=0.1)
        sp.add_argument("--lambda-n", type=float, default=0.1)

    def add_grid(sp):
        sp.add_argument("--grid-a", default="0.02,0.05,0.1,0.2,0.3,0.5")
        sp.add_argument("--grid-b", default="0.02,0.05,0.1,0.2,0.3,0.5")
        sp.add_argument("--grid-n", default="0.02,0.05,0.08,0.1,0.15")
        sp.add_argument("--folds", type=int, default=5)
        sp.add_argument("--cv-restarts", type=int, default=2)
        sp.add_argument("--cv-max-iter", type=int, default=200)

    sp = sub.add_parser("fit", help="fit on CSV data, optionally after CV")
    add_common(sp); add_data(sp); add_penalties(sp); add_grid(sp)
    sp.add_argument("--cv", action="store_true", help="select penalties by CV first")
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("cv", help="cross-validate penalties on CSV data")
    add_common(sp); add_data(sp); add_grid(sp)
    sp.set_defaults(func=_cmd_cv)

    def add_sim(sp):
        sp.add_argument("--n", type=int, default=200)
        sp.add_argument("--m", type=int, default=20)
        sp.add_argument("--q", type=int, default=20)
        sp.add_argument("--rho-x", type=float, default=0.0)
        sp.add_argument("--rho-m", type=float, default=0.0)
        sp.add_argument("--c-signal", type=float, default=0.5)
        sp.add_argument("--s", type=int, default=5)
        sp.add_argument("--sigma-y2", type=float, default=1.0)
        sp.add_argument("--regime", choices=[r.value for r in Regime],
                        default=Regime.COMPLETE.value)
        sp.add_argument("--target-mp", type=float, default=0.5)
        sp.add_argument("--misspecify", choices=[v.value for v in Misspecify],
                        default=Misspecify.NONE.value)

    sp = sub.add_parser("simulate", help="generate a synthetic dataset as CSV")
    add_common(sp); add_sim(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("benchmark", help="replicate a simulation condition")
    add_common(sp); add_sim(sp); add_penalties(sp); add_grid(sp)
    sp.add_argument("--grid", action="store_true", help="tune per replicate by CV")
    sp.add_argument("--replicates", type=int, default=100)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--label", default="benchmark")
    sp.add_argument("--format", default="json,tsv")
    sp.set_defaults(func=_cmd_benchmark)

    sp = sub.add_parser("verify", help="run the built-in verification checks")
    add_common(sp)
    sp.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, RaggedRows) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NoAdmissibleSolution as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MedaggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
