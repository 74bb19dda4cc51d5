"""Command-line behaviour and exit codes."""

import json

import pytest

from qapsat.cli import main


@pytest.fixture
def instance(tmp_path):
    assert main(["generate", "--n", "8", "--m", "6", "--m1", "5", "--seed", "42", "--out", str(tmp_path)]) == 0
    (dat,) = tmp_path.glob("*.dat")
    return dat


def test_generate_writes_pair(instance):
    assert instance.with_suffix(".json").exists()
    assert json.loads(instance.with_suffix(".json").read_text())["seed"] == 42


def test_generate_reproducible(tmp_path, instance):
    other = tmp_path / "again"
    main(["generate", "--n", "8", "--m", "6", "--m1", "5", "--seed", "42", "--out", str(other)])
    assert (other / instance.name).read_bytes() == instance.read_bytes()


def test_solve_plain_and_csv(instance, capsys):
    assert main(["solve", "--in", str(instance), "--method", "bnb", "--target", "auto"]) == 0
    out = capsys.readouterr().out
    assert "minimum:" in out and "satisfied:" in out and "nodes:" in out
    assert main(["solve", "--in", str(instance), "--method", "enum", "--format", "csv"]) == 0
    header, values = capsys.readouterr().out.strip().splitlines()
    row = dict(zip(header.split(","), values.split(",")))
    assert int(row["minimum"]) >= 60 and row["proven"] == "1"


def test_solve_without_sidecar_is_optimization(instance, capsys):
    instance.with_suffix(".json").unlink()
    assert main(["solve", "--in", str(instance), "--target", "auto", "--format", "csv"]) == 0
    header, values = capsys.readouterr().out.strip().splitlines()
    assert dict(zip(header.split(","), values.split(",")))["satisfied"] == ""


def test_rots(instance, capsys):
    assert main(["rots", "--in", str(instance), "--runs", "5", "--seed", "1", "--format", "csv"]) == 0
    first = capsys.readouterr().out
    main(["rots", "--in", str(instance), "--runs", "5", "--seed", "1", "--format", "csv"])
    assert capsys.readouterr().out == first


def test_usage_errors(capsys):
    assert main(["solve", "--bogus"]) == 1
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["solve", "--in", "x.dat", "--method", "cplex"]) == 1
    assert "usage" in capsys.readouterr().err


def test_data_errors(tmp_path, capsys):
    assert main(["solve", "--in", str(tmp_path / "missing.dat")]) == 2
    bad = tmp_path / "bad.dat"
    bad.write_text("2\n0 1\nx 0\n0 1\n1 0\n")
    assert main(["solve", "--in", str(bad)]) == 2
    assert "bad.dat:3" in capsys.readouterr().err


def test_help_documents_flags(capsys):
    for cmd, flags in (("generate", ["--n", "--k", "--m", "--m1", "--seed", "--out"]),
                       ("suite", ["--plan", "--out", "--seed"]),
                       ("solve", ["--in", "--method", "--target", "--node-cap", "--format"]),
                       ("rots", ["--in", "--optimum", "--runs", "--seed", "--format"]),
                       ("experiment", ["--plan", "--ledger", "--workers", "--solvers"]),
                       ("analyze", ["--ledger", "--out"]),
                       ("plot", ["--fits", "--out"])):
        assert main([cmd, "--help"]) == 0
        text = capsys.readouterr().out
        for f in flags:
            assert f in text


def test_pipeline(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"n": [6, 7], "m1": [2, 4], "m": {"start": 1, "stop": 12},
                                "instances_per_cell": 4, "master_seed": 3, "solvers": ["bnb"]}))
    assert main(["suite", "--plan", str(plan), "--out", str(tmp_path / "suite")]) == 0
    assert len(list((tmp_path / "suite").glob("*.dat"))) == 2 * 2 * 12 * 4
    ledger = tmp_path / "ledger.csv"
    assert main(["experiment", "--plan", str(plan), "--ledger", str(ledger), "--solvers", "bnb,rots"]) == 0
    assert main(["analyze", "--ledger", str(ledger), "--out", str(tmp_path / "fits")]) == 0
    assert (tmp_path / "fits" / "fits.csv").exists()
    assert list((tmp_path / "fits").glob("*.svg"))
    assert main(["plot", "--fits", str(tmp_path / "fits"), "--out", str(tmp_path / "plots")]) == 0
    assert list((tmp_path / "plots").glob("*.svg"))


def test_experiment_needs_ledger(tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"n": [6], "m1": [2], "m": [1]}))
    assert main(["experiment", "--plan", str(plan)]) == 1
