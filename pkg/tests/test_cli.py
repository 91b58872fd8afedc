from __future__ import annotations

import json

import pytest
import yaml

from corrugator.app.main import main
from corrugator.infrastructure.export.report_store import load_report

IDENTITY_RUN = {
    "name": "identity",
    "domain": ["-0.5", "0.5", "-0.5", "0.5"],
    "v0": "0",
    "A": ["1", "0", "1"],
    "eps": "0.25",
    "lambdas": [1, 40, 1600],
    "stage": {"method": "ad", "stageBudget": 1},
    "sampling": {"n": 200, "keep": 50},
    "precision": {"seed": 3},
    "grid": {"h": "0.1", "maxPoints": 1000},
    "output": {"meshes": True, "meshFormats": ["obj"]},
}


def _write(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def c1_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _write(root, IDENTITY_RUN)
    code = main(["c1", "--config", str(cfg), "--out-dir", str(root / "out")])
    return code, root / "out" / "identity" / "c1"


def test_c1_run_writes_report_and_table(c1_run):
    code, run_dir = c1_run
    assert code == 0
    report = load_report(run_dir / "report.json")
    assert report.pipeline == "c1"
    assert report.status == "budget_exhausted"
    assert report.stages[0].lambdas == ["1", "40", "1600"]
    assert report.metadata.seed == 3 and report.metadata.digits == 15
    assert (run_dir / "tables" / "stages.csv").is_file()
    lines = [json.loads(line) for line in (run_dir / "run.log").read_text(encoding="utf-8").splitlines()]
    assert lines[-1]["msg"] == "finished"
    assert "mesh_skipped" in [line["msg"] for line in lines]
    assert sorted(k for k in report.artifacts if k.startswith("mesh_")) == ["mesh_v0_obj", "mesh_v1_obj", "mesh_v2_obj"]
    assert (run_dir / "meshes" / "v2.obj").is_file()


def test_verify_accepts_the_report(c1_run, capsys):
    _, run_dir = c1_run
    assert main(["verify", str(run_dir / "report.json")]) == 0
    assert "all pass" in capsys.readouterr().out


def test_verify_rejects_a_tampered_report(c1_run, tmp_path):
    _, run_dir = c1_run
    data = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    check = data["stages"][0]["steps"][0]["checks"][0]
    check["measured"][0] = "1e300"
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(data), encoding="utf-8")
    assert main(["verify", str(tampered)]) == 3


def test_verify_errors(tmp_path):
    assert main(["verify", str(tmp_path / "missing.json")]) == 4
    bad = tmp_path / "old.json"
    bad.write_text(json.dumps({"schema": 0}), encoding="utf-8")
    assert main(["verify", str(bad)]) == 2


def test_empty_sweep(tmp_path, capsys):
    cfg = _write(tmp_path, {"domain": "-1,1,-1,1", "A": ["0", "0", "0"], "holder": {"sigmas": []}})
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "sweep sweep: ok" in out
    assert "sigma" in out


def test_non_positive_eps_is_a_config_error(tmp_path):
    cfg = _write(tmp_path, dict(IDENTITY_RUN, eps="0"))
    assert main(["c1", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


def test_unknown_example(tmp_path):
    assert main(["c1", "ex9", "--out-dir", str(tmp_path)]) == 2


def test_bad_expression_is_a_config_error(tmp_path):
    cfg = _write(tmp_path, dict(IDENTITY_RUN, v0="x +* y"))
    assert main(["c1", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


def test_holder_stage_refusal_is_reported(tmp_path):
    data = {
        "name": "too_large",
        "domain": "0,1,0,1",
        "A": ["1", "0", "1"],
        "holder": {"sigma": "35", "lam1": "1e19"},
        "sampling": {"n": 50, "holderPairs": 50},
        "output": {"meshes": False},
    }
    cfg = _write(tmp_path, data)
    assert main(["holder", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]) == 3
    report = load_report(tmp_path / "out" / "too_large" / "holder" / "report.json")
    assert report.status == "error"
    assert "delta0" in report.error


def test_export_writes_mesh(tmp_path, capsys):
    out = tmp_path / "plane.obj"
    code = main(["export", "--expr", "x+y", "--rect", "0,1,0,1", "--h", "0.5", "--format", "obj", "--out", str(out)])
    assert code == 0
    text = out.read_text(encoding="utf-8").splitlines()
    assert sum(line.startswith("v ") for line in text) == 9
    assert sum(line.startswith("f ") for line in text) == 8
    assert "9 vertices" in capsys.readouterr().out


def test_export_warns_on_coarse_grid(tmp_path, capsys):
    out = tmp_path / "plane.csv"
    args = ["export", "--expr", "x", "--rect", "0,1,0,1", "--h", "0.5", "--format", "csv", "--out", str(out)]
    assert main(args + ["--lambda", "10"]) == 0
    assert "warning:" in capsys.readouterr().err


def test_export_needs_an_expression(tmp_path):
    assert main(["export", "--rect", "0,1,0,1", "--out", str(tmp_path / "x.obj")]) == 2
