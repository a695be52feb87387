import json
import subprocess
import sys

import pytest

from nonisopot import __version__
from nonisopot.cli import DEFAULTS, run
from nonisopot.io import read_csv, read_json


def call(*argv):
    return run([str(a) for a in argv])


def test_grid_json(tmp_path):
    out = tmp_path / "grid.json"
    assert call("grid", "--n", 1, "--resolution", 16, "--out", out) == 0
    data = read_json(out)
    assert data["version"] == __version__
    assert data["config"]["command"] == "grid"
    assert data["config"]["params"]["resolution"] == 16
    assert len(data["result"]["nodes"]) == 16
    assert data["result"]["weight"]["descriptor"] == {"kind": "constant", "c": 1.0}


def test_wolff_ratio_csv_from_config(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"params": {"n": 1, "p": 2, "s": 0.3, "resolution": 128, "measures": 3, "seed": 4}}))
    out = tmp_path / "w.csv"
    assert call("wolff-ratio", "--config", cfg, "--out", out) == 0
    rows, meta = read_csv(out)
    assert list(rows[0]) == ["measure_id", "E", "I_W", "ratio"]
    assert len(rows) == 3
    assert meta["config"]["params"]["seed"] == 4
    assert meta["version"] == __version__


def test_flags_override_config_override_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"resolution": 64, "measures": 2, "seed": 1}))
    out = tmp_path / "w.csv"
    assert call("wolff-ratio", "--config", cfg, "--seed", 9, "--out", out) == 0
    params = read_csv(out)[1]["config"]["params"]
    assert params["resolution"] == 64
    assert params["seed"] == 9
    assert params["p"] == 2.0
    assert DEFAULTS["wolff-ratio"]["measures"] != 2 and params["measures"] == 2


def test_byte_identical_reruns(tmp_path):
    args = ["wolff-ratio", "--n", 1, "--resolution", 128, "--measures", 3, "--seed", 7]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call(*args, "--out", a) == 0
    assert call(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_equivalence_summary(tmp_path):
    out, summ = tmp_path / "e.csv", tmp_path / "e.json"
    code = call("equivalence", "--n", 1, "--p", 2, "--s", 0.3, "--eps", 0, "--seed", 7, "--measures", 2,
                "--atoms", 6, "--resolutions", "64,128", "--base-resolution", 16, "--max-level", 4,
                "--out", out, "--summary", summ)
    assert code == 0
    rows, _ = read_csv(out)
    assert len(rows) == 4
    summary = read_json(summ)
    assert summary["summary"]["rows"] == 4
    assert summary["config"]["params"]["seed"] == 7


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        [],
        ["capacity", "--s", 1.5],
        ["capacity", "--p", 1.5, "--method", "dual", "--resolution", 32],
        ["grid", "--resolution", 3],
        ["grid", "--n", 3],
        ["wolff-ratio", "--alpha", 0.5],
        ["grid", "--n", 1, "--eps", 0.5],
        ["capacity", "--resolution", "abc"],
    ],
)
def test_validation_errors_exit_1(argv, capsys):
    assert call(*argv) == 1
    assert capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": 3}))
    assert call("grid", "--config", cfg) == 1
    cfg.write_text("[1, 2]")
    assert call("grid", "--config", cfg) == 1
    assert call("grid", "--config", tmp_path / "missing.json") == 1


def test_nonconvergence_exit_2(tmp_path):
    out = tmp_path / "c.json"
    with pytest.warns(RuntimeWarning):
        code = call("capacity", "--p", 1.5, "--resolution", 64, "--tol", 1e-30, "--out", out)
    assert code == 2
    data = read_json(out)
    assert data["result"]["status"] == "inexact"


def test_capacity_converged(tmp_path):
    out = tmp_path / "c.json"
    assert call("capacity", "--resolution", 64, "--radius", 0.5, "--out", out) == 0
    res = read_json(out)["result"]
    assert res["converged"] and res["value"] > 0
    assert res["method"] == "dual"


def test_stdout_default(capsys):
    assert call("continuity", "--n", 1, "--p", 2, "--s", 0.7, "--resolution", 64) == 0
    text = capsys.readouterr().out
    assert text.startswith("# nonisopot ")
    assert "\r\n" in text


@pytest.mark.parametrize(
    "argv",
    [
        ["weight-diag", "--resolution", 16, "--eps", 0.5],
        ["norms", "--count", 2, "--degree", 4, "--resolution", 64],
        ["potentials", "--measures", 2, "--resolution", 128, "--holo", "--lam", 0.5],
        ["ball-capacity", "--resolution", 256, "--radii", "0.25,0.125"],
        ["tents", "--measures", 2, "--atoms", 4, "--resolution", 64],
    ],
)
def test_other_subcommands_run(argv, tmp_path):
    out = tmp_path / "o.csv"
    assert call(*argv, "--out", out) == 0
    rows, meta = read_csv(out)
    assert rows and meta["config"]["command"] == argv[0]


def test_module_entry_point_and_workers(tmp_path):
    out = tmp_path / "g.json"
    env = {"NONISOPOT_WORKERS": "1", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "nonisopot", "grid", "--resolution", "8", "--out", str(out)],
                          env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    bad = subprocess.run([sys.executable, "-m", "nonisopot", "grid"], env={**env, "NONISOPOT_WORKERS": "x"},
                         capture_output=True, text=True)
    assert bad.returncode == 1
