"""
Fibrehom Run Driver

Pipeline orchestration: generate or read the mesh, solve the load program,
write curves, fields and the manifest. Sweeps run config variants in a
worker pool.

Usage:
    from fibrehom.driver import execute
    from fibrehom.run_config import load_run_config

    outcome = execute(load_run_config(Path("configs/ud_gfrp/rve1.json")))
    print(outcome.status, outcome.outputs["curve"])
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constraints import BCKind
from .exceptions import ConfigError, FibrehomError, MeshError, SolverError
from .layout import FibreLayout, generate_layout
from .materials.matrix import PointHistory, drive_material_point
from .mesh import Mesh, mesh_quality, read_mesh, validate_mesh, with_periodic_pairs, write_mesh
from .mesher import insert_cohesive, mesh_ud_rve, stack_laminae, structured_box_mesh
from .models import HomogenizedResult, RunStatus
from .output import environment_versions, write_curve, write_json_atomic, write_sweep_curves, write_vtk
from .run_config import MeshSource, RunConfig
from .solver import RVESolver
from .utils import format_float

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_MESH = 3
EXIT_SOLVE = 4


def exit_code_for(exc: BaseException) -> int:
    """CLI exit status of an exception."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, MeshError):
        return EXIT_MESH
    if isinstance(exc, SolverError):
        return EXIT_SOLVE
    return EXIT_OTHER


@dataclass
class RunOutcome:
    """
    What a run produced.

    Attributes:
        config: The resolved config
        status: converged or failed
        result: Homogenisation result (partial when failed)
        outputs: Written file paths by role
        timings: Seconds per pipeline stage
        message: Failure diagnostic
        mesh_summary: Mesh counts
    """
    config: RunConfig
    status: RunStatus
    result: Optional[HomogenizedResult] = None
    outputs: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    message: Optional[str] = None
    mesh_summary: Dict[str, int] = field(default_factory=dict)

    def manifest(self) -> Dict[str, Any]:
        return {
            "name": self.config.name,
            "status": self.status.value,
            "message": self.message,
            "created_at": datetime.now().isoformat(),
            "versions": environment_versions(),
            "seed": self.config.seed,
            "threads": self.config.threads,
            "timings": self.timings,
            "mesh": self.mesh_summary,
            "outputs": self.outputs,
            "steps": 0 if self.result is None else len(self.result.steps),
            "config": self.config.to_dict(),
        }


def generate_mesh(config: RunConfig) -> Tuple[Mesh, List[FibreLayout]]:
    """
    Raw mesh of a run plus the fibre layouts it was generated from.

    Raises:
        MeshError: On generation, ingestion or validation failure
    """
    mc = config.mesh
    layouts: List[FibreLayout] = []
    if mc.source is MeshSource.FILE:
        mesh = read_mesh(mc.file)
    elif mc.source is MeshSource.BOX:
        mesh = structured_box_mesh(mc.divisions, mc.lengths)
    elif mc.source is MeshSource.UD:
        layout = generate_layout(mc.gen_params(config.seed), mc.cell)
        mesh = mesh_ud_rve(layout, mc.depth, mc.nz, mc.target_edge)
        layouts.append(layout)
    else:
        # stacking faces must coincide: fibres kept off them and layers left at the default spacing
        lower = generate_layout(mc.gen_params(config.seed, wall_axes=("y",)), mc.cell)
        upper = generate_layout(mc.gen_params(config.seed + 1, wall_axes=("y",)), (mc.depth, mc.cell[1]))
        mesh = stack_laminae(
            mesh_ud_rve(lower, mc.depth, None, mc.target_edge),
            mesh_ud_rve(upper, mc.cell[0], None, mc.target_edge),
        )
        layouts.extend((lower, upper))
    return mesh, layouts


def build_mesh(config: RunConfig) -> Mesh:
    """
    Mesh of a run, with cohesive elements and periodic pairs as needed.

    Raises:
        MeshError: On generation, ingestion or validation failure
    """
    mesh, _ = generate_mesh(config)

    if config.interface is not None and mesh.n_cohesive == 0:
        a, b = config.interface_regions
        if a in mesh.regions and b in mesh.regions:
            mesh = insert_cohesive(mesh, (a, b))
    if config.boundary_condition is BCKind.PERIODIC and mesh.periodic_pairs is None:
        mesh = with_periodic_pairs(mesh)
    mesh_quality(mesh)
    return mesh


def check_mesh(path: Path) -> Dict[str, Any]:
    """
    Parse and validate a mesh file without solving.

    Returns:
        Counts plus the minimum dihedral angle
    """
    mesh = read_mesh(path)
    validate_mesh(mesh)
    quality = mesh_quality(mesh)
    summary: Dict[str, Any] = dict(mesh.summary())
    summary["volume"] = mesh.volume
    summary["min_dihedral_deg"] = quality.worst
    summary["poor_tets"] = len(quality.poor)
    return summary


def write_generated(config: RunConfig) -> Dict[str, str]:
    """
    Generate the layout and mesh of a config without solving.

    Writes the mesh file and one layout CSV per generated lamina.

    Raises:
        ConfigError: If the config reads its mesh from a file
    """
    if config.mesh.source is MeshSource.FILE:
        raise ConfigError(None, "nothing to generate for a file mesh")
    mesh, layouts = generate_mesh(config)
    out = config.output.dir
    written = {"mesh": str(write_mesh(mesh, out / f"{config.name}.mesh"))}
    for i, layout in enumerate(layouts):
        path = out / f"{config.name}_layout{i}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(layout.to_csv())
        written[f"layout{i}"] = str(path)
        logger.info("Layout %d: %r", i, layout)
    return written


def solve(config: RunConfig, mesh: Mesh) -> HomogenizedResult:
    """Run the load program on a built mesh."""
    solver = RVESolver(
        mesh,
        config.regions,
        config.boundary_condition,
        config.interface,
        config.tolerances,
    )
    return solver.run_program(config.program)


def _write_outputs(config: RunConfig, mesh: Mesh, result: HomogenizedResult, outcome: RunOutcome) -> None:
    outcome.outputs["curve"] = str(write_curve(result, config.output.curve_path))
    if config.output.vtk:
        for snap in result.snapshots:
            path = config.output.dir / f"{config.name}_step{snap.step:05d}.vtk"
            outcome.outputs[f"vtk_step{snap.step}"] = str(write_vtk(mesh, snap, path))


def execute(config: RunConfig, write: bool = True) -> RunOutcome:
    """
    Full pipeline for one config.

    Mesh failures propagate before anything is written. Solver failures
    write the partial curve and a failed manifest, then propagate.

    Raises:
        MeshError: Mesh generation or validation failed
        SolverError: The program could not be completed
    """
    outcome = RunOutcome(config=config, status=RunStatus.CONVERGED)
    t0 = time.perf_counter()
    mesh = build_mesh(config)
    outcome.timings["mesh"] = time.perf_counter() - t0
    outcome.mesh_summary = mesh.summary()
    logger.info("Run %s: %r", config.name, mesh)

    t1 = time.perf_counter()
    failure: Optional[SolverError] = None
    try:
        outcome.result = solve(config, mesh)
    except SolverError as exc:
        failure = exc
        outcome.status = RunStatus.FAILED
        outcome.message = str(exc)
        outcome.result = getattr(exc, "result", None)
    outcome.timings["solve"] = time.perf_counter() - t1

    if write:
        if outcome.result is not None:
            _write_outputs(config, mesh, outcome.result, outcome)
        outcome.timings["total"] = time.perf_counter() - t0
        manifest_path = config.output.manifest_path
        outcome.outputs["manifest"] = str(manifest_path)
        write_json_atomic(outcome.manifest(), manifest_path)
    if failure is not None:
        raise failure
    return outcome


def drive_point(config: RunConfig) -> PointHistory:
    """
    Material-point response of the first matrix binding along the program.

    Controlled components follow the program targets; the others are held
    at zero stress.
    """
    params = config.regions.matrix_params
    if params is None:
        raise ConfigError(None, "point runs need a matrix region")
    controlled = config.program.controlled
    targets = np.array([t[list(controlled)] for _, t in config.program.targets()])
    return drive_material_point(params, targets, controlled, tol=config.tolerances.local_tol)


# Sweeps

@dataclass
class SweepVariant:
    value: Any
    status: RunStatus
    outcome: Optional[RunOutcome] = None
    message: Optional[str] = None


@dataclass
class SweepOutcome:
    axis: str
    variants: List[SweepVariant]
    outputs: Dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> List[SweepVariant]:
        return [v for v in self.variants if v.status is RunStatus.FAILED]

    def summary(self) -> Dict[str, Any]:
        return {
            "axis": self.axis,
            "variants": [
                {
                    "value": v.value if not isinstance(v.value, float) else format_float(v.value),
                    "status": v.status.value,
                    "message": v.message,
                    "manifest": v.outcome.outputs.get("manifest") if v.outcome else None,
                }
                for v in self.variants
            ],
        }


def _variant_dir_name(axis: str, value: Any) -> str:
    text = format_float(value) if isinstance(value, float) else str(value)
    return f"{axis}={text}".replace("/", "_")


def _run_variant(config: RunConfig) -> RunOutcome:
    try:
        return execute(config)
    except SolverError as exc:
        outcome = RunOutcome(config=config, status=RunStatus.FAILED, message=str(exc))
        outcome.result = getattr(exc, "result", None)
        return outcome


def run_sweep(config: RunConfig, axis: str, values: Sequence[Any], threads: Optional[int] = None) -> SweepOutcome:
    """
    Run one variant per value of a scalar config entry.

    Every override is validated before any variant starts. A failing
    variant is recorded and the sweep continues.

    Raises:
        ConfigError: Empty value list or an invalid override
    """
    if not values:
        raise ConfigError(None, "sweep needs at least one value")
    variants: List[Tuple[Any, RunConfig]] = []
    for value in values:
        variant = config.with_override(axis, value)
        variant = variant.with_output_dir(config.output.dir / _variant_dir_name(axis, value))
        variants.append((value, variant))

    workers = max(1, min(threads or config.threads, len(variants)))
    logger.info("Sweep over %s: %d variants on %d workers", axis, len(variants), workers)
    by_value: Dict[int, SweepVariant] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(_run_variant, cfg): i for i, (_, cfg) in enumerate(variants)}
        for future in as_completed(futures):
            i = futures[future]
            value = variants[i][0]
            try:
                outcome = future.result()
            except Exception as exc:
                if isinstance(exc, FibrehomError):
                    logger.warning("Variant %s=%r failed: %s", axis, value, exc)
                else:
                    logger.exception("Variant %s=%r failed unexpectedly", axis, value)
                by_value[i] = SweepVariant(value, RunStatus.FAILED, message=str(exc) or type(exc).__name__)
                continue
            if outcome.status is RunStatus.FAILED:
                logger.warning("Variant %s=%r failed: %s", axis, value, outcome.message)
            by_value[i] = SweepVariant(value, outcome.status, outcome, outcome.message)

    ordered = [by_value[i] for i in range(len(variants))]
    sweep = SweepOutcome(axis, ordered)
    curves = [(v.value, v.outcome.result if v.outcome else None) for v in ordered]
    sweep.outputs["curves"] = str(write_sweep_curves(axis, curves, config.output.dir / "sweep_curves.csv"))
    sweep.outputs["summary"] = str(write_json_atomic(sweep.summary(), config.output.dir / "sweep_summary.json"))
    return sweep

