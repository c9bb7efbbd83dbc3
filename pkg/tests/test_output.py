"""Tests for curve, VTK and manifest writers."""

import json

import numpy as np
import pytest

from fibrehom.mesher import insert_cohesive
from fibrehom.models import FieldSnapshot, HomogenizedResult, StepRecord
from fibrehom.output import (
    CURVE_COLUMNS,
    UNITS_ROW,
    environment_versions,
    read_curve,
    write_curve,
    write_json_atomic,
    write_sweep_curves,
    write_vtk,
)


def _result(scale: float = 1.0) -> HomogenizedResult:
    result = HomogenizedResult("periodic", 1.0)
    rng = np.random.default_rng(4)
    for step in (1, 2, 3):
        strain = rng.normal(scale=1e-3, size=6)
        stress = scale * rng.normal(scale=30.0, size=6)
        result.steps.append(StepRecord(step, strain, stress, stress))
    return result


class TestCurve:
    def test_layout(self, tmp_path):
        path = write_curve(_result(), tmp_path / "sub" / "curve.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == UNITS_ROW
        assert lines[1].split(",") == CURVE_COLUMNS
        assert len(lines) == 2 + 4

    def test_first_row_is_unloaded(self, tmp_path):
        data = read_curve(write_curve(_result(), tmp_path / "curve.csv"))
        assert data.shape == (4, 13)
        np.testing.assert_array_equal(data[0], 0.0)
        np.testing.assert_array_equal(data[:, 0], [0, 1, 2, 3])

    def test_values_are_exact(self, tmp_path):
        result = _result()
        data = read_curve(write_curve(result, tmp_path / "curve.csv"))
        np.testing.assert_array_equal(data[1:, 1:7], result.strains)
        np.testing.assert_array_equal(data[1:, 7:], result.stresses)

    def test_repeat_writes_are_identical(self, tmp_path):
        a = write_curve(_result(), tmp_path / "a.csv").read_bytes()
        b = write_curve(_result(), tmp_path / "b.csv").read_bytes()
        assert a == b


def test_sweep_curves_skip_failed_variants(tmp_path):
    path = write_sweep_curves(
        "interface.Gf", [(0.002, _result()), (0.003, None), (0.1, _result(2.0))], tmp_path / "sweep.csv"
    )
    lines = path.read_text().splitlines()
    assert lines[1].split(",")[0] == "interface.Gf"
    labels = {line.split(",")[0] for line in lines[2:]}
    assert labels == {"0.002", "0.1"}
    assert len(lines) == 2 + 2 * 4


def test_json_atomic(tmp_path):
    path = write_json_atomic({"a": 1, "b": [1.5, None]}, tmp_path / "deep" / "m.json")
    assert json.loads(path.read_text()) == {"a": 1, "b": [1.5, None]}
    assert not path.with_suffix(".tmp").exists()
    write_json_atomic({"a": 2}, path)
    assert json.loads(path.read_text()) == {"a": 2}


def test_environment_versions():
    versions = environment_versions()
    assert versions["numpy"] == np.__version__
    assert {"fibrehom", "scipy", "python", "platform"} <= set(versions)


def test_vtk_snapshot(tmp_path, bimaterial_cube):
    pytest.importorskip("vtk")
    mesh = insert_cohesive(bimaterial_cube)
    snapshot = FieldSnapshot(
        step=7,
        displacement=np.zeros((mesh.n_nodes, 3)),
        plastic_strain=np.linspace(0.0, 1e-3, mesh.n_tets),
        damage=np.full(mesh.n_cohesive, 0.25),
    )
    path = write_vtk(mesh, snapshot, tmp_path / "snap.vtk")
    text = path.read_text()
    assert "UNSTRUCTURED_GRID" in text
    for name in ("displacement", "region", "plastic_strain", "damage"):
        assert name in text
    assert f"CELL_TYPES {mesh.n_tets + mesh.n_cohesive}" in text
