import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from medagg import io as mio
from medagg.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from medagg.errors import ParseError, RaggedRows


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mat = rng.normal(size=(7, 3)) * np.pi
    path = tmp_path / "m.csv"
    mio.save_csv_matrix(path, mat, ["c1", "c2", "c3"])
    loaded, names = mio.load_csv_matrix(path)
    assert names == ["c1", "c2", "c3"]
    np.testing.assert_array_equal(loaded, mat)  # bit-exact via 17 digits


def test_csv_parse_error_location(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1.0,2.0\n3.0,NA\n")
    with pytest.raises(ParseError) as err:
        mio.load_csv_matrix(path)
    assert "row 3" in str(err.value)


def test_csv_ragged(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b\n1.0,2.0\n3.0\n")
    with pytest.raises(RaggedRows):
        mio.load_csv_matrix(path)


def test_simulate_fit_round_trip(tmp_path):
    sim_dir = tmp_path / "sim"
    code = main([
        "simulate", "--n", "120", "--m", "8", "--q", "8",
        "--rho-x", "0.3", "--rho-m", "0.3", "--regime", "complete",
        "--seed", "4", "--out", str(sim_dir),
    ])
    assert code == EXIT_OK
    meta = json.loads((sim_dir / "truth.json").read_text())
    mio.validate_payload(meta, "sim_meta")

    fit_dir = tmp_path / "fit"
    code = main([
        "fit", "--x", str(sim_dir / "X.csv"), "--m", str(sim_dir / "M.csv"),
        "--y", str(sim_dir / "Y.csv"),
        "--lambda-a", "0.2", "--lambda-b", "0.2", "--lambda-n", "0.2",
        "--restarts", "4", "--seed", "0", "--out", str(fit_dir),
    ])
    assert code == EXIT_OK
    payload = json.loads((fit_dir / "fit_result.json").read_text())
    mio.validate_payload(payload, "fit_result")
    # generating exposures are x1..x5; the fit keeps mostly those
    true_named = {f"x{i}" for i in range(1, 6)}
    assert len(set(payload["support_a"]) & true_named) >= 4


def test_missing_path_is_config_error(tmp_path):
    code = main([
        "fit", "--x", str(tmp_path / "nope.csv"), "--m", str(tmp_path / "nope.csv"),
        "--y", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o"),
    ])
    assert code == EXIT_CONFIG


def test_total_shrinkage_is_solver_error(tmp_path):
    sim_dir = tmp_path / "sim"
    main(["simulate", "--n", "80", "--m", "4", "--q", "4", "--s", "3",
          "--seed", "1", "--out", str(sim_dir)])
    code = main([
        "fit", "--x", str(sim_dir / "X.csv"), "--m", str(sim_dir / "M.csv"),
        "--y", str(sim_dir / "Y.csv"),
        "--lambda-a", "1000", "--lambda-b", "1000", "--lambda-n", "0.1",
        "--restarts", "2", "--seed", "0", "--out", str(tmp_path / "f"),
    ])
    assert code == EXIT_SOLVER


def test_benchmark_fixed_penalties_and_determinism(tmp_path):
    args = [
        "benchmark", "--n", "100", "--m", "6", "--q", "6",
        "--rho-x", "0.3", "--rho-m", "0.3", "--regime", "complete",
        "--replicates", "3", "--workers", "1", "--seed", "9",
        "--lambda-a", "0.2", "--lambda-b", "0.2", "--lambda-n", "0.2",
        "--restarts", "3",
    ]
    out1 = tmp_path / "b1"
    out2 = tmp_path / "b2"
    assert main(args + ["--out", str(out1)]) == EXIT_OK
    assert main(args + ["--out", str(out2)]) == EXIT_OK
    j1 = (out1 / "benchmark.json").read_bytes()
    j2 = (out2 / "benchmark.json").read_bytes()
    assert j1 == j2  # byte-identical under identical seeds
    payload = json.loads(j1)
    mio.validate_payload(payload, "benchmark")
    tsv = (out1 / "benchmark.tsv").read_text()
    assert tsv.splitlines()[0].split("\t") == mio.BENCH_TSV_COLUMNS


def test_verify_subcommand(tmp_path):
    code = main(["verify", "--seed", "5", "--out", str(tmp_path / "v")])
    payload = json.loads((tmp_path / "v" / "verify.json").read_text())
    mio.validate_payload(payload, "verify")
    names = {c["name"] for c in payload["checks"]}
    assert {"gradient_check", "grid_oracle", "identifiability"} <= names


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "medagg.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "benchmark" in proc.stdout
