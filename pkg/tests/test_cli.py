import subprocess
import sys

import pytest

from eftqdi.cli import main
from eftqdi.config import ExperimentConfig, dump_config
from eftqdi.presets import example_config


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(dump_config(example_config(1, horizon=40, reps=2, seed=5)))
    return path


def test_validate_ok(config_file, capsys):
    assert main(["validate", "--config", str(config_file)]) == 0
    out = capsys.readouterr().out
    assert "assumption_1.ergodic = true" in out
    assert "certificate.lambda_min_W = " in out


def test_validate_disconnected_union(tmp_path, capsys):
    data = example_config(1, horizon=40).model_dump()
    data["ensemble"]["graphs"] = [{"edges": [[0, 1], [1, 0]], "weight": 0.4}] * 4
    path = tmp_path / "bad.json"
    path.write_text(dump_config(ExperimentConfig.model_validate(data)))
    assert main(["validate", "--config", str(path)]) == 1
    assert "Assumption 1" in capsys.readouterr().err


def test_run_writes_outputs(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--seed", "9", "--out", str(out), "--horizon", "30", "--rate-window", "3:30"]) == 0
    lines = (out / "mse.csv").read_text().splitlines()
    assert lines[0] == "k,mse_fe,mse_ene,mse_fe_baseline" and len(lines) == 31
    report = (out / "report.txt").read_text()
    assert "seed = 9" in report and "fit.mse_fe.window = [3, 30]" in report


def test_run_rejects_invalid_assumption(tmp_path, capsys):
    data = example_config(1, horizon=40).model_dump()
    data["theta"] = [3.0, 1.0, -1.0]
    path = tmp_path / "c.json"
    path.write_text(dump_config(ExperimentConfig.model_validate(data)))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "Assumption 3" in capsys.readouterr().err


@pytest.mark.parametrize("content", ["{not json", '{"dimension": 3}', "[]"])
def test_malformed_config(tmp_path, content, capsys):
    path = tmp_path / "c.json"
    path.write_text(content)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2


def test_unwritable_output(config_file, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", str(config_file), "--out", str(blocker / "sub")]) == 2


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["run", "--config"])
    assert e.value.code == 2


def test_example_small(tmp_path):
    out = tmp_path / "ex"
    assert main(["example-sec6", "--case", "2", "--out", str(out), "--reps", "2", "--horizon", "50"]) == 0
    assert (out / "mse.csv").exists() and (out / "config.json").exists()


def test_module_entry_point(tmp_path):
    out = tmp_path / "ex"
    proc = subprocess.run(
        [sys.executable, "-m", "eftqdi", "example-sec6", "--case", "1", "--out", str(out), "--reps", "1", "--horizon", "20"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "mse.csv").read_text().startswith("k,mse_fe,mse_ene,mse_fe_baseline\n1,")
