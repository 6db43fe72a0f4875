from safmodel.cli import *
from safmodel.modelfile import MPS_HEADER

import csv
import json
import os

import pytest

TINY_DATA = """[scenario]
name = "tiny"
case = "electrolysis"
seed = 4

[data.rwgs]
n = 40

[train]
epochs = 5
hidden_width = 4
batch_size = 16
"""


def run(*argv):
    return main(list(argv))


def test_parser():
    args = safmodel_parser().parse_args(["solve", "--scenario", "toy", "--gap", "1e-3", "--set", "a.b=1",
                                         "--set", "c=2"])
    assert args.command == "solve"
    assert args.gap == 1e-3
    assert args.overrides == ["a.b=1", "c=2"]
    with pytest.raises(SystemExit):
        safmodel_parser().parse_args(["solve"])


def test_solve(tmp_path):
    out = str(tmp_path)
    assert run("solve", "--scenario", "toy", "--out", out) == EXIT_OK
    for name in ("solution.json", "verifier.json", "solver.log"):
        assert os.path.exists(os.path.join(out, name)), name
    with open(os.path.join(out, "solution.json")) as f:
        solution = json.load(f)
    assert solution["status"] == "optimal"
    assert solution["scenario"] == "toy"
    assert len(solution["digest"]) == 16
    with open(os.path.join(out, "verifier.json")) as f:
        assert json.load(f)["verifier"]["passed"] is True
    with open(os.path.join(out, "solver.log")) as f:
        assert "finished: status=optimal" in f.read()


def test_verify(tmp_path):
    out = str(tmp_path)
    assert run("solve", "--scenario", "toy", "--out", out) == EXIT_OK
    assert run("verify", "--scenario", "toy", "--out", out) == EXIT_OK
    path = os.path.join(out, "solution.json")
    with open(path) as f:
        solution = json.load(f)
    solution["values"]["Wsrc"] *= 2.0
    tampered = os.path.join(out, "tampered.json")
    with open(tampered, "w") as f:
        json.dump(solution, f)
    assert run("verify", "--scenario", "toy", "--out", out, "--solution", tampered) == EXIT_ERROR


def test_pareto(tmp_path):
    out = str(tmp_path)
    assert run("pareto", "--scenario", "two_route", "--out", out) == EXIT_OK
    with open(os.path.join(out, "pareto.csv")) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3
    assert [r["status"] for r in rows] == ["optimal", "optimal", "infeasible"]
    assert float(rows[0]["objective"]) <= float(rows[1]["objective"])


def test_pareto_caps(tmp_path):
    out = str(tmp_path)
    assert run("pareto", "--scenario", "two_route", "--out", out, "--caps", "3") == EXIT_OK
    with open(os.path.join(out, "pareto.csv")) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3
    assert all(r["status"] == "optimal" for r in rows)


def test_export(tmp_path):
    out = str(tmp_path)
    assert run("export", "--scenario", "toy", "--out", out, "--format", "mps") == EXIT_OK
    with open(os.path.join(out, "model.mps")) as f:
        assert f.readline().rstrip("\n") == MPS_HEADER


def test_report(tmp_path):
    out = str(tmp_path)
    assert run("report", "--scenario", "toy", "--out", out) == EXIT_OK
    with open(os.path.join(out, "report.json")) as f:
        data = json.load(f)
    assert "AEC" in data["cost_breakdown"]["capex"]
    assert data["cost_breakdown"]["total"] == pytest.approx(data["objective"], rel=1e-9)


def test_unknown_override(tmp_path, capsys):
    assert run("solve", "--scenario", "toy", "--out", str(tmp_path), "--set", "solver.bogus=1") == EXIT_ERROR
    assert "unknown key solver.bogus" in capsys.readouterr().err


def test_unknown_scenario(tmp_path):
    assert run("solve", "--scenario", str(tmp_path / "missing.toml"), "--out", str(tmp_path)) == EXIT_ERROR


def test_gen_data_without_data_table(tmp_path, capsys):
    assert run("gen-data", "--scenario", "toy", "--out", str(tmp_path)) == EXIT_ERROR
    assert "[data]" in capsys.readouterr().err


def test_gen_data_and_train(tmp_path):
    scenario = tmp_path / "tiny.toml"
    scenario.write_text(TINY_DATA)
    out = str(tmp_path / "out")
    assert run("gen-data", "--scenario", str(scenario), "--out", out) == EXIT_OK
    assert os.path.exists(os.path.join(out, "data_rwgs.csv"))
    assert run("train", "--scenario", str(scenario), "--out", out) == EXIT_OK
    assert os.path.exists(os.path.join(out, "net_rwgs.json"))
    with open(os.path.join(out, "metrics_rwgs.json")) as f:
        metrics = json.load(f)
    assert metrics["seed"] == 4
    assert metrics["oracle"] == "rwgs"
