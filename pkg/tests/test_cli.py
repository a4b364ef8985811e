import json
import subprocess
import sys

import pytest

from aggdiff.cli import main
from aggdiff.config import OUTPUT_ENV

CONFIG = {
    "domain": {"L": 1.0, "M": 8},
    "time": {"T": 0.1, "dt": 0.02},
    "model": {"energy": {"kind": "porous_medium", "m": 3}, "V": "double_well", "rho0": "tent"},
}


@pytest.fixture
def config(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "out"))
    path = tmp_path / "config.json"
    path.write_text(json.dumps(CONFIG))
    return path


def test_run_and_check(config, tmp_path, capsys):
    assert main(["run", str(config)]) == 0
    out = tmp_path / "out"
    assert {p.name for p in out.iterdir()} == {"snapshots.csv", "diagnostics.json", "run.json"}
    assert main(["check", str(config), "--json"]) == 0
    printed = capsys.readouterr().out
    assert "energy_dissipation" in printed
    assert json.loads((out / "check.json").read_text())["checks"]["flow_interchange"]["holds"]


def test_set_override(config, tmp_path):
    assert main(["run", str(config), "--set", "time.dt=0.05", "--set", "output.faces=true"]) == 0
    run = json.loads((tmp_path / "out" / "run.json").read_text())
    assert run["derived"]["steps"] == 2 and run["config"]["time"]["dt"] == 0.05
    assert (tmp_path / "out" / "faces.csv").exists()


def test_study_and_steady(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "out"))
    raw = {
        "domain": {"L": 1.0, "M": 4},
        "time": {"T": 0.25, "dt": 0.125},
        "model": {"energy": {"kind": "boltzmann"}, "rho0": {"kind": "cosine_mode"}},
        "scenario": {"reference": "heat_neumann"},
    }
    path = tmp_path / "heat.json"
    path.write_text(json.dumps(raw))
    assert main(["study", str(path), "--levels", "3"]) == 0
    assert "eoc_L1" in capsys.readouterr().out
    study = json.loads((tmp_path / "out" / "diagnostics.json").read_text())["study"]
    assert len(study["rows"]) == 3
    raw["model"]["V"] = "quadratic"
    raw["scenario"] = {"reference": "gibbs_discrete"}
    path.write_text(json.dumps(raw))
    assert main(["steady", str(path), "--t-max", "1.0"]) == 0
    assert "distance" in capsys.readouterr().out


def test_exit_codes(config, tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["run", str(config), "--set", "domain.M=-1"]) == 2
    assert main(["run", str(config), "--set", "model.V=x +"]) == 2
    stiff = ["--set", "time.dt=1.0", "--set", "time.T=1.0", "--set", "domain.M=32",
             "--set", "model.energy.m=2", "--set", "solver.method=picard", "--set", "solver.max_outer_iters=5"]
    assert main(["run", str(config), *stiff]) == 3
    assert main(["check", str(config), "--snapshots", str(tmp_path / "none.csv")]) == 4


def test_io_error_exit(tmp_path, monkeypatch):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    monkeypatch.setenv(OUTPUT_ENV, str(blocker / "x"))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(CONFIG))
    assert main(["run", str(path)]) == 4


def test_module_entry_point(config):
    proc = subprocess.run([sys.executable, "-m", "aggdiff", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "study" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "aggdiff", "run"], capture_output=True, text=True)
    assert proc.returncode == 2
