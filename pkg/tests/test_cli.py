import json

import numpy as np
import pytest

from vintagecap.cli import run


def test_simulate_zero_control(tmp_path, capsys):
    code = run(["simulate", "--model", "lq-1", "--horizon", "0.5",
                "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["steps"] == 100
    assert (tmp_path / "trajectory.csv").exists()


def test_simulate_control_file(tmp_path, capsys):
    n_steps, n = 20, 200
    data = np.zeros((n_steps, n + 1))
    data[:, 0] = 1.0
    ctrl = tmp_path / "u.csv"
    np.savetxt(ctrl, data, delimiter=",")
    code = run(["simulate", "--model", "lq-1", "--horizon", "0.1",
                "--x", "zero", "--control", str(ctrl), "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["final_h_norm"] > 0.0


def test_simulate_control_shape_mismatch(tmp_path, capsys):
    ctrl = tmp_path / "u.csv"
    np.savetxt(ctrl, np.zeros((3, 5)), delimiter=",")
    code = run(["simulate", "--model", "lq-1", "--horizon", "0.1",
                "--control", str(ctrl), "--out", str(tmp_path)])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_optimize_outputs(tmp_path, capsys):
    code = run(["optimize", "--model", "lq-1", "--horizon", "0.5",
                "--tol", "1e-6", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["converged"] is True
    for name in ("report.json", "history.csv", "control.csv",
                 "trajectory.csv"):
        assert (tmp_path / name).exists()
    header = (tmp_path / "control.csv").read_text().splitlines()[0]
    assert header.startswith("u0,u1_0,")


def test_value_null_model(tmp_path, capsys):
    code = run(["value", "--model", "null-1", "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["limit"] == 0.0
    assert (tmp_path / "value_probe.json").exists()
    assert (tmp_path / "convergence.csv").exists()


def test_feedback_closed_loop(tmp_path, capsys):
    code = run(["feedback", "--model", "lq-1", "--horizon", "1.0",
                "--out", str(tmp_path)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["total_gap"]) <= 1e-8
    lines = (tmp_path / "closed_loop.csv").read_text().splitlines()
    assert lines[0] == "time,u0,Q,cost_rate,gap"


def test_verify_null_passes_and_is_deterministic(tmp_path, capsys):
    code = run(["verify", "--model", "null-1", "--out", str(tmp_path)])
    out1 = capsys.readouterr().out
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["model"] == "null-1"
    assert summary["seed"] == 42
    assert all(a["pass"] for a in summary["audits"])
    assert {"name", "margin", "pass"} <= set(summary["audits"][0])
    code2 = run(["verify", "--model", "null-1", "--out", str(tmp_path)])
    out2 = capsys.readouterr().out
    assert code2 == 0
    assert out1 == out2


def test_report_renders_figures(tmp_path, capsys):
    run(["optimize", "--model", "lq-1", "--horizon", "0.5",
         "--tol", "1e-6", "--out", str(tmp_path)])
    capsys.readouterr()
    out = tmp_path / "report"
    code = run(["report", "--in", str(tmp_path), "--out", str(out)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert "trajectory.png" in payload["figures"]
    assert "optimizer_history.png" in payload["figures"]
    for name in payload["figures"]:
        assert (out / name).stat().st_size > 0
    listing = (out / "report_summary.csv").read_text().splitlines()
    assert listing[0] == "artifact,kind"
    assert any(row == "trajectory.png,figure" for row in listing)


def test_bad_model_path_exit_code(tmp_path, capsys):
    code = run(["value", "--model", str(tmp_path / "missing.json")])
    assert code == 2


def test_unknown_subcommand_exit_code(capsys):
    assert run(["frobnicate"]) == 2


def test_custom_config_roundtrip(tmp_path, capsys):
    import vintagecap.model as vm
    cfg = vm._canonical_config("lq-1", 50)
    path = tmp_path / "model.json"
    path.write_text(json.dumps(cfg))
    code = run(["simulate", "--model", str(path), "--horizon", "0.2",
                "--out", str(tmp_path)])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["steps"] == 10
