"""Shared fixtures for the fibrehom test suite."""

import json
from pathlib import Path

import numpy as np
import pytest

from fibrehom.config import reset_settings
from fibrehom.materials.matrix import MatrixParams
from fibrehom.materials.regions import FibreBinding, MatrixBinding, RegionSpec
from fibrehom.mesh import Mesh, with_box_face_sets, with_periodic_pairs
from fibrehom.mesher import FIBRE_REGION, MATRIX_REGION, structured_box_mesh
from fibrehom.solver import RVESolver


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Every test starts from default environment-driven settings."""
    for name in ("FIBREHOM_THREADS", "FIBREHOM_LOG_LEVEL", "FIBREHOM_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def epoxy() -> MatrixParams:
    return MatrixParams.epoxy()


@pytest.fixture
def elastic_epoxy() -> MatrixParams:
    return MatrixParams.epoxy(plastic=False)


@pytest.fixture
def cube() -> Mesh:
    """Unit cube, 2x2x2 cells, periodic pairs attached."""
    return with_periodic_pairs(structured_box_mesh((2, 2, 2)))


def split_regions(mesh: Mesh, axis: int = 0, at: float = 0.5) -> Mesh:
    """Retag tets whose centroid lies above `at` along `axis` as fibre."""
    centroids = mesh.nodes[mesh.tets].mean(axis=1)
    regions = np.where(centroids[:, axis] > at, FIBRE_REGION, MATRIX_REGION)
    return with_box_face_sets(
        Mesh(nodes=mesh.nodes, tets=mesh.tets, tet_regions=regions, periodic_pairs=mesh.periodic_pairs)
    )


@pytest.fixture
def bimaterial_cube() -> Mesh:
    """Unit cube, 4x2x2 cells, fibre half for x > 0.5, periodic pairs attached."""
    return with_periodic_pairs(split_regions(structured_box_mesh((4, 2, 2))))


@pytest.fixture
def elastic_regions(elastic_epoxy) -> RegionSpec:
    return RegionSpec({
        MATRIX_REGION: MatrixBinding(elastic_epoxy),
        FIBRE_REGION: FibreBinding(Ef=74000.0, nu_f=0.2),
    })


@pytest.fixture
def plastic_regions(epoxy) -> RegionSpec:
    return RegionSpec({
        MATRIX_REGION: MatrixBinding(epoxy),
        FIBRE_REGION: FibreBinding(Ef=74000.0, nu_f=0.2),
    })


@pytest.fixture
def write_config(tmp_path):
    """Write a run config dict as JSON; outputs go under tmp_path/out."""

    def _write(data: dict, name: str = "run.json") -> Path:
        data = dict(data)
        data.setdefault("output", {"dir": str(tmp_path / "out")})
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2))
        return path

    return _write


@pytest.fixture
def box_config() -> dict:
    """Small elastic box run: two cells per side, uniaxial strain."""
    return {
        "name": "box",
        "mesh": {"source": "box", "divisions": [2, 2, 2]},
        "regions": {"1": {"type": "matrix", "plastic": False}},
        "boundary_condition": "periodic",
        "program": {"segments": [{"strain": {"11": 0.001}, "steps": 2}]},
    }


@pytest.fixture
def drop_22_stiffness(monkeypatch):
    """
    Zero the 22 row and column of C̄ for soft matrices (C̄11 below 8000 MPa).

    Elastic epoxy (E 3760) gives C̄11 near 7500 MPa, E 5000 near 10000 MPa.
    """
    exact = RVESolver.homogenized_stiffness

    def patched(self):
        c = exact(self).copy()
        if c[0, 0] < 8000.0:
            c[1, :] = c[:, 1] = 0.0
        return c

    monkeypatch.setattr(RVESolver, "homogenized_stiffness", patched)
