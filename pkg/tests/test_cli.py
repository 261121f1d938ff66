import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from atp.cli import run_cli

STEPS = 12  # small horizon keeps CLI runs fast


def run(argv):
    return run_cli(argv)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    demos = root / "demos"
    assert run(["gen-demos", "--out", str(demos), "--steps", str(STEPS), "--seed", "7"]) == 0
    data = root / "data.jsonl"
    assert run([
        "augment", "--demos", str(demos), "--n", "120", "--seed", "7", "--out", str(data),
    ]) == 0
    model = root / "model.json"
    assert run([
        "train", "--data", str(data), "--epochs", "2", "--batch", "30",
        "--seed", "0", "--out", str(model),
    ]) == 0
    return {"root": root, "demos": demos, "data": data, "model": model}


def test_gen_demos_writes_files(workspace):
    files = sorted(workspace["demos"].glob("demo_*.json"))
    assert len(files) == 4
    doc = json.loads(files[0].read_text())
    assert doc["steps"] == STEPS and doc["dof"] == 3


def test_augment_writes_jsonl(workspace):
    lines = workspace["data"].read_text().splitlines()
    assert len(lines) == 120
    row = json.loads(lines[0])
    assert set(row) == {"trajectory", "goal", "source_demo"}


def test_augment_byte_identical_under_seed(workspace, tmp_path):
    out1 = tmp_path / "a.jsonl"
    out2 = tmp_path / "b.jsonl"
    for out in (out1, out2):
        assert run([
            "augment", "--demos", str(workspace["demos"]), "--n", "60",
            "--seed", "21", "--out", str(out),
        ]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_train_emits_model_and_metrics(workspace):
    model_doc = json.loads(workspace["model"].read_text())
    assert model_doc["format"] == "atp-model-v1"
    assert "per_unit_kl" in model_doc["meta"]
    metrics = Path(str(workspace["model"]).replace(".json", ".metrics.csv"))
    lines = metrics.read_text().splitlines()
    assert len(lines) == 3  # header + 2 epochs
    assert lines[0].startswith("epoch,loss,recon_mse,goal_mse,kl_z,kl_c")


def test_train_byte_identical_under_seed(workspace, tmp_path):
    outs = []
    for name in ("m1.json", "m2.json"):
        out = tmp_path / name
        assert run([
            "train", "--data", str(workspace["data"]), "--epochs", "2", "--batch", "30",
            "--seed", "3", "--out", str(out), "--metrics", str(out) + ".csv",
        ]) == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert Path(str(outs[0]) + ".csv").read_bytes() == Path(str(outs[1]) + ".csv").read_bytes()


def test_plan_writes_trajectory_and_report(workspace, tmp_path, capsys):
    out = tmp_path / "traj.json"
    code = run([
        "plan", "--model", str(workspace["model"]), "--c", "0",
        "--z", "0,0,0,0,0", "--goal", "0.6,0.4", "--project", "--out", str(out),
    ])
    printed = capsys.readouterr().out
    assert code == 0
    doc = json.loads(printed)
    assert doc["projection"]["converged"] is True
    assert doc["err_after_m"] < 1e-3
    traj = json.loads(out.read_text())
    assert traj["steps"] == STEPS


def test_plan_deterministic_output(workspace, tmp_path):
    outs = []
    for name in ("t1.json", "t2.json"):
        out = tmp_path / name
        assert run([
            "plan", "--model", str(workspace["model"]), "--c", "1",
            "--z", "0.5,0,0,0,0", "--goal", "0.6,0.4", "--out", str(out),
        ]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_traverse_bundle(workspace, tmp_path, capsys):
    out = tmp_path / "bundle.json"
    assert run([
        "traverse", "--model", str(workspace["model"]), "--axis", "1",
        "--grid", "-2,0,2", "--goal", "0.6,0.4", "--out", str(out),
    ]) == 0
    capsys.readouterr()
    doc = json.loads(out.read_text())
    assert len(doc["results"]) == 3


def test_eval_csv(workspace, tmp_path, capsys):
    out = tmp_path / "eval.csv"
    assert run([
        "eval", "--model", str(workspace["model"]), "--demos", str(workspace["demos"]),
        "--n", "4", "--seed", "5", "--out", str(out),
    ]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 4
    assert len(out.read_text().splitlines()) == 5


def test_domain_error_exits_1(workspace, capsys):
    code = run([
        "plan", "--model", str(workspace["model"]), "--c", "0",
        "--z", "0,0,0,0,0", "--goal", "9,9",
    ])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "UnreachableGoalError"


def test_missing_input_exits_1(tmp_path, capsys):
    code = run(["train", "--data", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "m.json")])
    capsys.readouterr()
    assert code == 1


def test_usage_error_exits_2():
    proc = subprocess.run(
        [sys.executable, "-m", "atp.cli", "plan", "--model"],
        capture_output=True,
    )
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "atp.cli", "frobnicate"], capture_output=True)
    assert proc.returncode == 2


def test_entrypoint_runs_in_subprocess(workspace):
    proc = subprocess.run(
        [
            sys.executable, "-m", "atp.cli", "plan",
            "--model", str(workspace["model"]),
            "--c", "0", "--goal", "0.6,0.4",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["err_before_m"] >= 0
