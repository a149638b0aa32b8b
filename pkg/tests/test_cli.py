"""Test the command-line front end."""

import json

import pytest

from libincompat import cli

CONFIG = {
    "schema_version": 1,
    "epsilon": 0.25,
    "measures": {"fast_distance": True},
    "solver": {"starts": 1},
    "qw": {"samples": 2, "mesh_level": 1, "starts": 1},
}


@pytest.fixture
def config_path(tmp_path):
    """A small Euclidean problem on disk."""
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(CONFIG), encoding="utf-8")
    return path


def _run(*argv):
    return cli.main([str(arg) for arg in argv])


def test_mesh_command(tmp_path, config_path, capsys):
    """Test the mesh command writes the mesh and its summary."""
    out = tmp_path / "out"
    assert _run("mesh", "--config", config_path, "--out", out) == cli.EXIT_OK
    assert (out / "mesh.json").exists()
    summary = json.loads((out / "mesh_summary.json").read_text(encoding="utf-8"))
    assert summary["epsilon"] == 0.25
    assert json.loads(capsys.readouterr().out) == summary


def test_minimize_command(tmp_path, config_path):
    """Test the minimize report."""
    out = tmp_path / "out"
    assert _run("minimize", "--config", config_path, "--out", out) == cli.EXIT_OK
    report = json.loads((out / "minimize.json").read_text(encoding="utf-8"))
    assert report["min_energy"] == pytest.approx(0.0, abs=1e-20)
    assert report["diagnostics"]["converged"]


def test_sweep_command(tmp_path, config_path):
    """Test the sweep writes both the table and the JSON report."""
    out = tmp_path / "out"
    code = _run("sweep", "--config", config_path, "--out", out, "--eps", "0.4,0.3,0.25")
    assert code == cli.EXIT_OK
    rows = (out / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("epsilon,n_vertices,min_energy")
    assert len(rows) == 4
    assert len(json.loads((out / "sweep.json").read_text(encoding="utf-8"))["entries"]) == 3


def test_qw_command(tmp_path, config_path, capsys):
    """Test the QW table is written and echoed."""
    out = tmp_path / "out"
    assert _run("qw", "--config", config_path, "--out", out, "--seed", 3) == cli.EXIT_OK
    text = (out / "qw.csv").read_text(encoding="utf-8")
    assert capsys.readouterr().out == text
    assert len(text.splitlines()) == 3


def test_curvature_command(tmp_path, capsys):
    """Test the curvature report of the default configuration."""
    out = tmp_path / "out"
    assert _run("curvature", "--out", out, "--grid", 4) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["flat"]
    assert report["count"] == 4


def test_validate_command(tmp_path, capsys):
    """Test a single suite through the command line."""
    out = tmp_path / "out"
    assert _run("validate", "--suite", "conformal", "--out", out) == cli.EXIT_OK
    results = json.loads(capsys.readouterr().out)
    assert [result["name"] for result in results] == ["conformal"]


def test_invalid_config_exits_with_one(tmp_path, capsys):
    """Test an invalid configuration is reported on stderr."""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema_version": 1, "epsilon": -1}), encoding="utf-8")
    assert _run("mesh", "--config", path, "--out", tmp_path / "out") == cli.EXIT_INVALID
    assert "error: epsilon" in capsys.readouterr().err


def test_bad_scales_exit_with_one(tmp_path, capsys):
    """Test a malformed --eps list."""
    code = _run("sweep", "--eps", "0.2,x", "--out", tmp_path / "out")
    assert code == cli.EXIT_INVALID
    assert "error:" in capsys.readouterr().err


def test_unknown_suite_is_a_usage_error():
    """Test argparse rejects suites that do not exist."""
    with pytest.raises(SystemExit):
        _run("validate", "--suite", "everything")
