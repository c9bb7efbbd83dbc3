"""
Fibrehom Output Writers

Curve CSV files, legacy-VTK field snapshots and the JSON run manifest.
"""

import csv
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
import scipy

from .mesh import Mesh
from .models import COMPONENT_NAMES, FieldSnapshot, HomogenizedResult, StepRecord
from .utils import format_float

logger = logging.getLogger(__name__)

UNITS_ROW = "# units: strain [-] (engineering shear), stress [MPa]"
CURVE_COLUMNS = ["step"] + [f"e{c}" for c in COMPONENT_NAMES] + [f"s{c}" for c in COMPONENT_NAMES]
COHESIVE_REGION = -1


def curve_rows(steps: Iterable[StepRecord]) -> List[List[str]]:
    rows = [["0"] + ["0.0"] * 12]
    for record in steps:
        rows.append(
            [str(record.step)]
            + [format_float(v) for v in record.strain]
            + [format_float(v) for v in record.stress]
        )
    return rows


def write_curve(result: HomogenizedResult, path: Path) -> Path:
    """
    Strain-stress curve, one row per step plus the unloaded origin.

    Columns: step, e11..e31, s11..s31. Floats round-trip exactly so that
    repeated runs compare byte for byte.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(UNITS_ROW + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        writer.writerows(curve_rows(result.steps))
    logger.info("Wrote %d curve rows to %s", len(result.steps) + 1, path)
    return path


def read_curve(path: Path) -> np.ndarray:
    """(rows, 13) array of step, strains, stresses."""
    with open(path, newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    reader = csv.reader(lines)
    next(reader)
    return np.array([[float(v) for v in row] for row in reader]).reshape(-1, 13)


def write_sweep_curves(
    axis: str, curves: Sequence[tuple], path: Path
) -> Path:
    """
    Merged comparative CSV of a sweep.

    Args:
        axis: Swept config path, used as the first column name
        curves: (value, HomogenizedResult or None) per variant
        path: Output file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(UNITS_ROW + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([axis] + CURVE_COLUMNS)
        for value, result in curves:
            if result is None:
                continue
            label = format_float(value) if isinstance(value, float) else str(value)
            for row in curve_rows(result.steps):
                writer.writerow([label] + row)
    return path


def write_vtk(mesh: Mesh, snapshot: FieldSnapshot, path: Path) -> Path:
    """
    Legacy-VTK unstructured grid of one snapshot.

    Tets become VTK_TETRA cells and cohesive elements VTK_WEDGE cells.
    Point data: displacement. Cell data: region (cohesive cells -1),
    plastic_strain and damage.
    """
    import vtk

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = vtk.vtkUnstructuredGrid()
    points = vtk.vtkPoints()
    points.SetNumberOfPoints(mesh.n_nodes)
    for i, xyz in enumerate(mesh.nodes):
        points.SetPoint(i, *xyz)
    grid.SetPoints(points)

    n_cells = mesh.n_tets + mesh.n_cohesive
    grid.Allocate(n_cells)
    for tet in mesh.tets:
        grid.InsertNextCell(vtk.VTK_TETRA, 4, [int(n) for n in tet])
    for wedge in mesh.cohesive:
        grid.InsertNextCell(vtk.VTK_WEDGE, 6, [int(n) for n in wedge])

    disp = vtk.vtkDoubleArray()
    disp.SetName("displacement")
    disp.SetNumberOfComponents(3)
    disp.SetNumberOfTuples(mesh.n_nodes)
    for i, v in enumerate(snapshot.displacement):
        disp.SetTuple3(i, *v)
    grid.GetPointData().AddArray(disp)

    region = np.concatenate((mesh.tet_regions, np.full(mesh.n_cohesive, COHESIVE_REGION)))
    plastic = np.concatenate((snapshot.plastic_strain, np.zeros(mesh.n_cohesive)))
    damage = np.concatenate((np.zeros(mesh.n_tets), snapshot.damage))
    for name, values, cls in (
        ("region", region, vtk.vtkIntArray),
        ("plastic_strain", plastic, vtk.vtkDoubleArray),
        ("damage", damage, vtk.vtkDoubleArray),
    ):
        array = cls()
        array.SetName(name)
        array.SetNumberOfComponents(1)
        array.SetNumberOfTuples(n_cells)
        for i, v in enumerate(values):
            array.SetTuple1(i, v)
        grid.GetCellData().AddArray(array)

    writer = vtk.vtkUnstructuredGridWriter()
    writer.SetFileName(str(path))
    writer.SetInputData(grid)
    writer.SetFileTypeToASCII()
    writer.Write()
    logger.info("Wrote field snapshot of step %d to %s", snapshot.step, path)
    return path


def environment_versions() -> Dict[str, str]:
    from . import __version__

    return {
        "fibrehom": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "platform": sys.platform,
    }


def write_json_atomic(data: Dict[str, Any], path: Path) -> Path:
    """Write JSON through a temporary file and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(".tmp")
    try:
        with open(temp_path, "w") as f:
            json.dump(data, f, indent=2, allow_nan=True)
            f.flush()
        temp_path.replace(path)
    except OSError:
        if temp_path.exists():
            temp_path.unlink()
        raise
    return path
