"""
Fibrehom Run Configuration

One JSON document describes a run: mesh source, region bindings, interface,
boundary condition, load program, tolerances and outputs.

Example:
    {
      "name": "rve1",
      "seed": 1,
      "mesh": {"source": "ud", "cell": [0.05, 0.05], "depth": 0.005,
               "generator": {"radius": 0.0025, "target_vf": 0.6}},
      "regions": {"1": {"type": "matrix"}, "2": {"type": "fibre", "Ef": 74000, "nu_f": 0.2}},
      "interface": {"ft": 50, "Gf": 0.002},
      "boundary_condition": "periodic",
      "program": {"segments": [{"strain": {"11": 0.01}, "steps": 50}]},
      "output": {"dir": "out/rve1"}
    }

Relative paths resolve against the directory of the config file. Floats
accept JSON Infinity and the string "inf" where unlimited values make sense.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .config import get_settings
from .constraints import BCKind
from .exceptions import ConfigError, FibrehomError
from .layout import GenParams
from .materials.cohesive import CohesiveParams
from .materials.regions import RegionSpec
from .mesher import FIBRE_REGION, MATRIX_REGION
from .models import LoadProgram
from .solver import SolverOptions
from .utils import set_dotted

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "name", "seed", "threads", "mesh", "regions", "interface",
    "boundary_condition", "program", "tolerances", "output",
}


class MeshSource(str, Enum):
    """Where the RVE mesh comes from."""
    FILE = "file"          # documented text format
    UD = "ud"              # random UD layout, extruded
    BOX = "box"            # structured brick of tets
    LAMINATE = "laminate"  # two UD blocks stacked cross-ply


@dataclass(frozen=True)
class MeshConfig:
    """
    Mesh section.

    Attributes:
        source: Mesh source
        file: Mesh file for FILE
        cell: In-plane cell (Lx, Ly) for UD and LAMINATE (Ly per lamina)
        depth: Extent along the fibres for UD and LAMINATE
        generator: Fibre generator settings (seed comes from the run)
        target_edge: Mesher target edge length
        nz: Element layers along the fibres
        divisions, lengths: Brick for BOX
    """
    source: MeshSource
    file: Optional[Path] = None
    cell: Optional[Tuple[float, float]] = None
    depth: Optional[float] = None
    generator: Optional[Dict[str, Any]] = None
    target_edge: Optional[float] = None
    nz: Optional[int] = None
    divisions: Tuple[int, int, int] = (1, 1, 1)
    lengths: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def gen_params(self, seed: int, **overrides: Any) -> GenParams:
        values = dict(self.generator or {})
        values["seed"] = seed
        values.update(overrides)
        return GenParams.from_dict(values)

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"source": self.source.value}
        if self.source is MeshSource.FILE:
            d["file"] = str(self.file)
        elif self.source is MeshSource.BOX:
            d["divisions"] = list(self.divisions)
            d["lengths"] = list(self.lengths)
        else:
            d["cell"] = list(self.cell)
            d["depth"] = self.depth
            d["generator"] = dict(self.generator or {})
            d["target_edge"] = self.target_edge
            d["nz"] = self.nz
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any], base_dir: Path) -> "MeshConfig":
        source = MeshSource(d.get("source", MeshSource.FILE.value))
        if source is MeshSource.FILE:
            if "file" not in d:
                raise ValueError("mesh.file is required for file meshes")
            path = Path(d["file"])
            path = path if path.is_absolute() else (base_dir / path)
            if not path.exists():
                raise ValueError(f"mesh file {path} does not exist")
            return cls(source=source, file=path.resolve())
        if source is MeshSource.BOX:
            return cls(
                source=source,
                divisions=tuple(int(v) for v in d.get("divisions", (1, 1, 1))),
                lengths=tuple(float(v) for v in d.get("lengths", (1.0, 1.0, 1.0))),
            )
        if "cell" not in d or "depth" not in d or "generator" not in d:
            raise ValueError(f"{source.value} meshes need cell, depth and generator")
        generator = dict(d["generator"])
        generator.pop("seed", None)
        return cls(
            source=source,
            cell=(float(d["cell"][0]), float(d["cell"][1])),
            depth=float(d["depth"]),
            generator=generator,
            target_edge=None if d.get("target_edge") is None else float(d["target_edge"]),
            nz=None if d.get("nz") is None else int(d["nz"]),
        )


@dataclass(frozen=True)
class OutputConfig:
    """
    Output section.

    Attributes:
        dir: Output directory
        curve: Curve CSV file name
        manifest: Manifest JSON file name
        vtk: Write legacy-VTK snapshots
    """
    dir: Path
    curve: str = "curve.csv"
    manifest: str = "manifest.json"
    vtk: bool = False

    @property
    def curve_path(self) -> Path:
        return self.dir / self.curve

    @property
    def manifest_path(self) -> Path:
        return self.dir / self.manifest

    def to_dict(self) -> Dict[str, Any]:
        return {"dir": str(self.dir), "curve": self.curve, "manifest": self.manifest, "vtk": self.vtk}

    @classmethod
    def from_dict(cls, d: Dict[str, Any], base_dir: Path, name: str) -> "OutputConfig":
        if d.get("dir"):
            out = Path(d["dir"])
            out = out if out.is_absolute() else base_dir / out
        else:
            out = get_settings().output_dir / name
        return cls(
            dir=out.resolve(),
            curve=str(d.get("curve", "curve.csv")),
            manifest=str(d.get("manifest", "manifest.json")),
            vtk=bool(d.get("vtk", False)),
        )


@dataclass(frozen=True)
class RunConfig:
    """
    A fully validated run.

    Attributes:
        name: Run name
        seed: Seed for generated layouts
        threads: Worker count for sweeps
        mesh: Mesh section
        regions: Region bindings
        interface: Cohesive constants, None without interfaces
        interface_regions: Region pair whose shared faces get cohesive elements
        boundary_condition: BC kind
        program: Load program
        tolerances: Solver options
        output: Output section
        base_dir: Directory relative paths were resolved against
    """
    name: str
    seed: int
    threads: int
    mesh: MeshConfig
    regions: RegionSpec
    interface: Optional[CohesiveParams]
    boundary_condition: BCKind
    program: LoadProgram
    tolerances: SolverOptions
    output: OutputConfig
    interface_regions: Tuple[int, int] = (MATRIX_REGION, FIBRE_REGION)
    base_dir: Path = field(default_factory=Path.cwd)

    def to_dict(self) -> Dict[str, Any]:
        """Resolved config; loading it again reproduces the run."""
        interface = None
        if self.interface is not None:
            interface = {**self.interface.to_dict(), "regions": list(self.interface_regions)}
        return {
            "name": self.name,
            "seed": self.seed,
            "threads": self.threads,
            "mesh": self.mesh.to_dict(),
            "regions": self.regions.to_dict(),
            "interface": interface,
            "boundary_condition": self.boundary_condition.value,
            "program": self.program.to_dict(),
            "tolerances": self.tolerances.to_dict(),
            "output": self.output.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any], base_dir: Optional[Path] = None, path: Optional[Path] = None) -> "RunConfig":
        """
        Validate and build a run config.

        Raises:
            ConfigError: On any missing, unknown or invalid entry
        """
        base = Path(base_dir) if base_dir else Path.cwd()
        if not isinstance(d, dict):
            raise ConfigError(path, "top level must be an object")
        unknown = set(d) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(path, f"unknown keys {sorted(unknown)}")
        try:
            name = str(d.get("name") or (path.stem if path else "run"))
            interface_dict = d.get("interface")
            interface = None
            interface_regions = (MATRIX_REGION, FIBRE_REGION)
            if interface_dict is not None:
                interface = CohesiveParams.from_dict(interface_dict)
                if "regions" in interface_dict:
                    a, b = (int(r) for r in interface_dict["regions"])
                    interface_regions = (a, b)
            if "regions" not in d or not d["regions"]:
                raise ValueError("regions must bind at least one region")
            if "program" not in d:
                raise ValueError("program is required")
            threads = int(d.get("threads") or get_settings().threads)
            if threads < 1:
                raise ValueError("threads must be at least 1")
            return cls(
                name=name,
                seed=int(d.get("seed", 0)),
                threads=threads,
                mesh=MeshConfig.from_dict(d.get("mesh") or {}, base),
                regions=RegionSpec.from_dict(d["regions"]),
                interface=interface,
                interface_regions=interface_regions,
                boundary_condition=BCKind.parse(d.get("boundary_condition", BCKind.PERIODIC.value)),
                program=LoadProgram.from_dict(d["program"]),
                tolerances=SolverOptions.from_dict(d.get("tolerances") or {}),
                output=OutputConfig.from_dict(d.get("output") or {}, base, name),
                base_dir=base,
            )
        except ConfigError:
            raise
        except (FibrehomError, KeyError, ValueError, TypeError) as exc:
            raise ConfigError(path, str(exc)) from exc

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed))

    def with_threads(self, threads: int) -> "RunConfig":
        return replace(self, threads=max(1, int(threads)))

    def with_output_dir(self, out: Path) -> "RunConfig":
        return replace(self, output=replace(self.output, dir=Path(out).resolve()))

    def with_override(self, dotted: str, value: Any) -> "RunConfig":
        """
        Copy with one scalar replaced, addressed by a dotted path such as
        'interface.Gf' or 'regions.2.Ef'.

        Raises:
            ConfigError: If the path does not exist or the value is invalid
        """
        try:
            updated = set_dotted(self.to_dict(), dotted, value)
        except KeyError:
            raise ConfigError(None, f"no config entry at {dotted!r}")
        return RunConfig.from_dict(updated, self.base_dir)

    def __repr__(self) -> str:
        return (
            f"RunConfig(name={self.name}, mesh={self.mesh.source.value}, "
            f"bc={self.boundary_condition.value}, steps={self.program.n_steps})"
        )


def load_run_config(path: Path) -> RunConfig:
    """
    Read and validate a JSON run config.

    Raises:
        ConfigError: Unreadable file, bad JSON or invalid content
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, f"cannot read: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"line {exc.lineno}: {exc.msg}") from exc
    config = RunConfig.from_dict(data, path.parent.resolve(), path)
    logger.info("Loaded %r from %s", config, path)
    return config
