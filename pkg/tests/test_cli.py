"""Tests for the fibrehom command line."""

import json

import pytest
from click.testing import CliRunner

from fibrehom.cli import cli
from fibrehom.mesh import write_mesh
from fibrehom.mesher import structured_box_mesh


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


UD = {
    "name": "ud",
    "mesh": {
        "source": "ud",
        "cell": [0.025, 0.025],
        "depth": 0.002,
        "nz": 2,
        "target_edge": 0.001,
        "generator": {"radius": 0.0025, "target_vf": 0.4, "min_gap": 0.0006},
    },
    "regions": {"1": {"type": "matrix"}, "2": {"type": "fibre", "Ef": 74000.0, "nu_f": 0.2}},
    "program": {"segments": [{"strain": {"11": 0.001}, "steps": 1}]},
}


class TestRun:
    def test_success(self, runner, write_config, box_config, tmp_path):
        result = runner.invoke(cli, ["run", str(write_config(box_config))])
        assert result.exit_code == 0, result.output
        assert "Curve:" in result.output
        assert "Manifest:" in result.output
        assert (tmp_path / "out" / "curve.csv").exists()
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "converged"

    def test_out_and_seed_overrides(self, runner, write_config, box_config, tmp_path):
        out = tmp_path / "elsewhere"
        result = runner.invoke(cli, ["run", str(write_config(box_config)), "--out", str(out), "--seed", "5"])
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 5
        assert not (tmp_path / "out").exists()

    def test_malformed_config(self, runner, write_config, box_config, tmp_path):
        box_config["colour"] = "red"
        result = runner.invoke(cli, ["run", str(write_config(box_config))])
        assert result.exit_code == 2
        assert "Error:" in result.output
        assert not (tmp_path / "out").exists()

    def test_config_required(self, runner):
        result = runner.invoke(cli, ["run"])
        assert result.exit_code == 2
        assert "CONFIG is required" in result.output

    def test_solve_failure(self, runner, write_config, box_config, tmp_path):
        box_config["regions"] = {"1": {"type": "matrix"}}
        box_config["program"] = {"segments": [
            {"strain": {"11": 0.0005}, "steps": 1},
            {"strain": {"11": 0.05}, "steps": 1},
        ]}
        box_config["tolerances"] = {"max_iterations": 1, "max_bisections": 0}
        result = runner.invoke(cli, ["run", str(write_config(box_config))])
        assert result.exit_code == 4
        assert "Last converged strain" in result.output
        assert (tmp_path / "out" / "manifest.json").exists()


    def test_singular_free_tangent_exits_with_solve_code(
        self, runner, write_config, box_config, tmp_path, drop_22_stiffness
    ):
        box_config["program"]["free_components"] = ["22"]
        result = runner.invoke(cli, ["run", str(write_config(box_config))])
        assert result.exit_code == 4, result.output
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["status"] == "failed"


class TestCheckMesh:
    def test_prints_counts(self, runner, tmp_path):
        path = write_mesh(structured_box_mesh((2, 2, 2)), tmp_path / "box.mesh")
        result = runner.invoke(cli, ["run", "--check-mesh", str(path)])
        assert result.exit_code == 0, result.output
        assert "nodes: 27" in result.output
        assert "min_dihedral_deg:" in result.output
        assert sorted(p.name for p in tmp_path.iterdir()) == ["box.mesh"]

    def test_bad_mesh(self, runner, tmp_path):
        path = tmp_path / "bad.mesh"
        path.write_text("NODES 2\n0 0 0\n")
        result = runner.invoke(cli, ["run", "--check-mesh", str(path)])
        assert result.exit_code == 3
        assert "line 1" in result.output


class TestSweep:
    def test_empty_values(self, runner, write_config, box_config):
        result = runner.invoke(cli, ["sweep", str(write_config(box_config)), "--axis", "regions.1.E", "--values", ","])
        assert result.exit_code == 2

    def test_runs(self, runner, write_config, box_config, tmp_path):
        result = runner.invoke(
            cli,
            ["sweep", str(write_config(box_config)), "--axis", "regions.1.E", "--values", "3000,4000", "-j", "2"],
        )
        assert result.exit_code == 0, result.output
        assert "regions.1.E=3000: converged" in result.output
        assert (tmp_path / "out" / "sweep_summary.json").exists()


def test_gen(runner, write_config, tmp_path):
    result = runner.invoke(cli, ["gen", str(write_config(UD)), "--seed", "3"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "ud.mesh").exists()
    assert (tmp_path / "out" / "ud_layout0.csv").exists()
    assert not (tmp_path / "out" / "curve.csv").exists()


def test_point_to_stdout(runner, write_config, box_config):
    box_config["regions"] = {"1": {"type": "matrix"}}
    result = runner.invoke(cli, ["point", str(write_config(box_config))])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == "step,e11,e22,e33,e12,e23,e31,s11,s22,s33,s12,s23,s31"
    assert len(lines) == 1 + 3


def test_point_to_file(runner, write_config, box_config, tmp_path):
    box_config["regions"] = {"1": {"type": "matrix"}}
    result = runner.invoke(cli, ["point", str(write_config(box_config)), "--out", str(tmp_path / "pt")])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "pt" / "box_point.csv").exists()
