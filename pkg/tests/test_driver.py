"""Tests for the run pipeline, generation-only runs and sweeps."""

import json
from pathlib import Path

import numpy as np
import pytest

from fibrehom.constraints import BCKind
from fibrehom.driver import (
    EXIT_CONFIG,
    EXIT_MESH,
    EXIT_OTHER,
    EXIT_SOLVE,
    build_mesh,
    check_mesh,
    drive_point,
    execute,
    exit_code_for,
    run_sweep,
    write_generated,
)
from fibrehom.exceptions import (
    ConfigError,
    ConvergenceError,
    MeshFormatError,
    ReturnMappingError,
    SolverError,
)
from fibrehom.materials.matrix import elastic_stiffness
from fibrehom.mesh import read_mesh, write_mesh
from fibrehom.mesher import structured_box_mesh
from fibrehom.models import LoadProgram, RunStatus
from fibrehom.output import read_curve
from fibrehom.run_config import RunConfig, load_run_config
from fibrehom.solver import RVESolver

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def ud_config(tmp_path) -> RunConfig:
    return RunConfig.from_dict({
        "name": "ud",
        "seed": 3,
        "mesh": {
            "source": "ud",
            "cell": [0.025, 0.025],
            "depth": 0.002,
            "nz": 2,
            "target_edge": 0.001,
            "generator": {"radius": 0.0025, "target_vf": 0.4, "min_gap": 0.0006, "seed": 99},
        },
        "regions": {"1": {"type": "matrix"}, "2": {"type": "fibre", "Ef": 74000.0, "nu_f": 0.2}},
        "interface": {"ft": 50.0, "Gf": 0.002},
        "program": {"segments": [{"strain": {"11": 0.001}, "steps": 1}]},
        "output": {"dir": str(tmp_path / "ud")},
    }, tmp_path)


@pytest.mark.parametrize("exc,code", [
    (ConfigError(None, "bad"), EXIT_CONFIG),
    (MeshFormatError(3, "bad"), EXIT_MESH),
    (ReturnMappingError(1.0, 50), EXIT_SOLVE),
    (RuntimeError("boom"), EXIT_OTHER),
])
def test_exit_codes(exc, code):
    assert exit_code_for(exc) == code


class TestExecute:
    def test_writes_curve_and_manifest(self, write_config, box_config):
        config = load_run_config(write_config(box_config))
        outcome = execute(config)
        assert outcome.status is RunStatus.CONVERGED
        curve = read_curve(outcome.outputs["curve"])
        assert curve.shape == (3, 13)
        np.testing.assert_allclose(curve[-1, 1], 0.001)
        assert curve[-1, 7] > curve[1, 7] > 0.0

        manifest = json.loads(config.output.manifest_path.read_text())
        assert manifest["status"] == "converged"
        assert manifest["steps"] == 2
        assert manifest["mesh"]["tets"] == outcome.mesh_summary["tets"]
        assert manifest["config"]["name"] == "box"
        assert {"mesh", "solve", "total"} <= set(manifest["timings"])
        assert "numpy" in manifest["versions"]

    def test_repeated_runs_write_identical_curves(self, ud_config, tmp_path):
        first = execute(ud_config.with_output_dir(tmp_path / "first"))
        second = execute(ud_config.with_output_dir(tmp_path / "second"))
        assert first.status is second.status is RunStatus.CONVERGED
        assert Path(first.outputs["curve"]).read_bytes() == Path(second.outputs["curve"]).read_bytes()

    def test_dry_execute_writes_nothing(self, write_config, box_config):
        config = load_run_config(write_config(box_config))
        outcome = execute(config, write=False)
        assert len(outcome.result.steps) == 2
        assert not config.output.dir.exists()

    def test_failure_writes_partial_outputs(self, write_config, box_config):
        box_config["regions"] = {"1": {"type": "matrix"}}
        box_config["program"] = {"segments": [
            {"strain": {"11": 0.0005}, "steps": 1},
            {"strain": {"11": 0.05}, "steps": 1},
        ]}
        box_config["tolerances"] = {"max_iterations": 1, "max_bisections": 0}
        config = load_run_config(write_config(box_config))
        with pytest.raises(ConvergenceError):
            execute(config)
        manifest = json.loads(config.output.manifest_path.read_text())
        assert manifest["status"] == "failed"
        assert manifest["steps"] == 1
        assert "Load step 2" in manifest["message"]
        assert read_curve(config.output.curve_path).shape == (2, 13)

    def test_singular_free_tangent_writes_failed_manifest(
        self, write_config, box_config, drop_22_stiffness
    ):
        box_config["program"]["free_components"] = ["22"]
        config = load_run_config(write_config(box_config))
        with pytest.raises(SolverError):
            execute(config)
        manifest = json.loads(config.output.manifest_path.read_text())
        assert manifest["status"] == "failed"
        assert "singular" in manifest["message"]
        assert read_curve(config.output.curve_path).shape == (1, 13)

    def test_vtk_snapshots(self, write_config, box_config, tmp_path):
        pytest.importorskip("vtk")
        box_config["output"] = {"dir": str(tmp_path / "vtk-out"), "vtk": True}
        outcome = execute(load_run_config(write_config(box_config)))
        assert (tmp_path / "vtk-out" / "box_step00002.vtk").exists()
        assert "vtk_step2" in outcome.outputs


class TestMesh:
    def test_check_mesh(self, tmp_path):
        box = structured_box_mesh((2, 2, 2))
        summary = check_mesh(write_mesh(box, tmp_path / "box.mesh"))
        assert summary["nodes"] == 27
        assert summary["tets"] == box.n_tets
        assert summary["volume"] == pytest.approx(1.0)
        assert summary["min_dihedral_deg"] > 0.0

    def test_check_mesh_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.mesh"
        path.write_text("not a mesh\n")
        with pytest.raises(MeshFormatError):
            check_mesh(path)

    def test_build_mesh_adds_cohesive_and_pairs(self, ud_config):
        mesh = build_mesh(ud_config)
        assert mesh.n_cohesive > 0
        assert mesh.periodic_pairs is not None and len(mesh.periodic_pairs) > 0

    def test_write_generated(self, ud_config):
        written = write_generated(ud_config)
        assert set(written) == {"mesh", "layout0"}
        mesh = read_mesh(written["mesh"])
        assert mesh.n_cohesive == 0
        assert len(mesh.regions) == 2
        lines = open(written["layout0"]).read().splitlines()
        assert lines[0] == "x,y,r"
        assert len(lines) > 1

    def test_run_seed_drives_layout(self, ud_config):
        a = write_generated(ud_config)
        first = open(a["layout0"]).read()
        b = write_generated(ud_config.with_seed(4))
        assert open(b["layout0"]).read() != first

    def test_file_source_has_nothing_to_generate(self, tmp_path, write_config, box_config):
        write_mesh(structured_box_mesh((1, 1, 1)), tmp_path / "cube.mesh")
        box_config["mesh"] = {"source": "file", "file": "cube.mesh"}
        with pytest.raises(ConfigError):
            write_generated(load_run_config(write_config(box_config)))


def test_drive_point(write_config, box_config):
    box_config["regions"] = {"1": {"type": "matrix"}}
    box_config["program"] = {
        "segments": [{"strain": {"11": 0.01}, "steps": 5}],
        "free_components": ["22", "33"],
    }
    history = drive_point(load_run_config(write_config(box_config)))
    assert history.stress.shape == (6, 6)
    np.testing.assert_allclose(history.stress[:, 1:3], 0.0, atol=1e-8 * 29.0)
    # below the tensile yield stress the response is linear
    assert history.stress[1, 0] == pytest.approx(3760.0 * 0.002, rel=1e-10)
    assert history.stress[-1, 0] < 3760.0 * 0.01


def test_drive_point_needs_matrix(write_config, box_config):
    box_config["regions"] = {"1": {"type": "fibre", "Ef": 74000.0, "nu_f": 0.2}}
    with pytest.raises(ConfigError):
        drive_point(load_run_config(write_config(box_config)))


class TestSweep:
    def test_runs_every_value(self, write_config, box_config):
        config = load_run_config(write_config(box_config))
        sweep = run_sweep(config, "regions.1.E", [3000.0, 5000.0], threads=2)
        assert [v.value for v in sweep.variants] == [3000.0, 5000.0]
        assert not sweep.failed
        low, high = (v.outcome.result.steps[-1].stress[0] for v in sweep.variants)
        assert high / low == pytest.approx(5000.0 / 3000.0, rel=1e-8)
        assert (config.output.dir / "regions.1.E=3000.0" / "curve.csv").exists()

        summary = json.loads(open(sweep.outputs["summary"]).read())
        assert summary["axis"] == "regions.1.E"
        assert [v["status"] for v in summary["variants"]] == ["converged", "converged"]
        rows = open(sweep.outputs["curves"]).read().splitlines()[2:]
        assert [r.split(",")[0] for r in rows] == ["3000.0"] * 3 + ["5000.0"] * 3

    def test_failed_variant_is_recorded(self, write_config, box_config):
        box_config["regions"] = {"1": {"type": "matrix"}}
        box_config["program"] = {"segments": [{"strain": {"11": 0.05}, "steps": 1}]}
        box_config["tolerances"] = {"max_iterations": 1, "max_bisections": 0}
        config = load_run_config(write_config(box_config))
        sweep = run_sweep(config, "regions.1.sigma_t0", [29.0, 1.0e6])
        statuses = [v.status for v in sweep.variants]
        assert statuses == [RunStatus.FAILED, RunStatus.CONVERGED]
        assert sweep.variants[0].message

    def test_singular_variant_does_not_stop_the_sweep(
        self, write_config, box_config, drop_22_stiffness
    ):
        box_config["program"]["free_components"] = ["22"]
        config = load_run_config(write_config(box_config))
        sweep = run_sweep(config, "regions.1.E", [3000.0, 5000.0], threads=2)
        assert [v.status for v in sweep.variants] == [RunStatus.FAILED, RunStatus.CONVERGED]
        assert "singular" in sweep.variants[0].message
        summary = json.loads(open(sweep.outputs["summary"]).read())
        assert [v["status"] for v in summary["variants"]] == ["failed", "converged"]

    def test_unexpected_error_is_recorded(self, write_config, box_config, monkeypatch):
        import fibrehom.driver as driver

        real = driver.execute

        def flaky(config):
            if config.regions.matrix_params.E == 3000.0:
                raise RuntimeError("disk full")
            return real(config)

        monkeypatch.setattr(driver, "execute", flaky)
        config = load_run_config(write_config(box_config))
        sweep = run_sweep(config, "regions.1.E", [3000.0, 5000.0])
        assert [v.status for v in sweep.variants] == [RunStatus.FAILED, RunStatus.CONVERGED]
        assert sweep.variants[0].message == "disk full"
        assert (config.output.dir / "sweep_summary.json").exists()

    def test_empty_values(self, write_config, box_config):
        config = load_run_config(write_config(box_config))
        with pytest.raises(ConfigError):
            run_sweep(config, "regions.1.E", [])

    def test_invalid_axis_runs_nothing(self, write_config, box_config):
        config = load_run_config(write_config(box_config))
        with pytest.raises(ConfigError):
            run_sweep(config, "interface.Gf", [0.002])
        assert not config.output.dir.exists()


class TestTextile:
    @pytest.fixture
    def textile(self) -> RunConfig:
        return load_run_config(CONFIG_DIR / "textile" / "exx.json")

    def test_weave_mesh_binds_yarn_directions(self, textile):
        mesh = build_mesh(textile)
        assert mesh.regions == [1, 2, 3]
        assert mesh.volume == pytest.approx(0.4)
        assert mesh.periodic_pairs is not None
        textile.regions.check(mesh)
        warp = textile.regions.bindings[2].directions(mesh, 2)
        weft = textile.regions.bindings[3].directions(mesh, 3)
        assert np.all(np.abs(warp.vectors[:, 0]) > 0.8)
        assert np.all(np.abs(weft.vectors[:, 1]) > 0.8)

    def test_weave_is_stiffer_in_plane(self, textile, elastic_epoxy):
        mesh = build_mesh(textile)
        solver = RVESolver(mesh, textile.regions, BCKind.PERIODIC)
        c = solver.homogenized_stiffness()
        np.testing.assert_allclose(c, c.T, rtol=0.0, atol=1e-8 * np.abs(c).max())
        assert c[0, 0] > elastic_stiffness(elastic_epoxy)[0, 0]
        assert c[1, 1] == pytest.approx(c[0, 0], rel=0.25)
        assert c[2, 2] < min(c[0, 0], c[1, 1])

        result = solver.run_program(LoadProgram.uniaxial("11", 0.0005, 1))
        np.testing.assert_allclose(result.steps[-1].stress, 0.0005 * c[:, 0], rtol=1e-6, atol=1e-9 * c[0, 0])
