"""
Fibrehom Region Bindings

Maps mesh region ids to material models: the elasto-plastic matrix, a
transversely isotropic yarn with a direction source, or an isotropic fibre.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..exceptions import ConfigError, ParameterError
from ..mesh import Mesh
from .matrix import MatrixParams
from .yarn import DirectionField, TransIsoParams, isotropic_from_fibre, potential_flow_directions

logger = logging.getLogger(__name__)


class BindingKind(str, Enum):
    MATRIX = "matrix"
    YARN = "yarn"
    FIBRE = "fibre"


class DirectionSource(str, Enum):
    """Where a yarn takes its per-element axis from."""
    MESH = "mesh"  # DIRECTIONS section of the mesh file
    FLOW = "flow"  # potential-flow solve between two face sets
    AXIS = "axis"  # one constant vector


@dataclass(frozen=True)
class MatrixBinding:
    params: MatrixParams
    kind: BindingKind = field(default=BindingKind.MATRIX, init=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind.value, **self.params.to_dict()}


@dataclass(frozen=True)
class FibreBinding:
    Ef: float
    nu_f: float
    kind: BindingKind = field(default=BindingKind.FIBRE, init=False)

    @property
    def params(self) -> TransIsoParams:
        return isotropic_from_fibre(self.Ef, self.nu_f)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.kind.value, "Ef": self.Ef, "nu_f": self.nu_f}


@dataclass(frozen=True)
class YarnBinding:
    """
    Transversely isotropic yarn.

    Attributes:
        params: Five elastic constants
        source: Direction source
        axis: Constant axis for DirectionSource.AXIS
        inlet, outlet: Face-set names for DirectionSource.FLOW
    """
    params: TransIsoParams
    source: DirectionSource = DirectionSource.MESH
    axis: Optional[Tuple[float, float, float]] = None
    inlet: Optional[str] = None
    outlet: Optional[str] = None
    kind: BindingKind = field(default=BindingKind.YARN, init=False)

    def __post_init__(self):
        object.__setattr__(self, "source", DirectionSource(self.source))
        if self.source is DirectionSource.AXIS:
            if self.axis is None or not np.linalg.norm(self.axis) > 0.0:
                raise ParameterError("axis", self.axis, "axis source needs a non-zero vector")
            object.__setattr__(self, "axis", tuple(float(a) for a in self.axis))
        if self.source is DirectionSource.FLOW and not (self.inlet and self.outlet):
            raise ParameterError("directions", self.source.value, "flow source needs inlet and outlet face sets")

    def directions(self, mesh: Mesh, region: int) -> DirectionField:
        elements = np.nonzero(mesh.tet_regions == region)[0]
        if self.source is DirectionSource.AXIS:
            return DirectionField.constant(elements, self.axis)
        if self.source is DirectionSource.FLOW:
            return potential_flow_directions(mesh, region, self.inlet, self.outlet)
        return DirectionField.from_mesh(mesh, elements)

    def to_dict(self) -> Dict[str, Any]:
        directions: Dict[str, Any] = {"source": self.source.value}
        if self.axis is not None:
            directions["axis"] = list(self.axis)
        if self.inlet:
            directions["inlet"] = self.inlet
            directions["outlet"] = self.outlet
        return {"type": self.kind.value, **self.params.to_dict(), "directions": directions}


Binding = Union[MatrixBinding, FibreBinding, YarnBinding]


def binding_from_dict(d: Dict[str, Any]) -> Binding:
    """Build one binding from its config entry."""
    body = dict(d)
    kind = body.pop("type", None)
    if kind == BindingKind.MATRIX.value:
        return MatrixBinding(MatrixParams.from_dict(body))
    if kind == BindingKind.FIBRE.value:
        return FibreBinding(Ef=float(body["Ef"]), nu_f=float(body["nu_f"]))
    if kind == BindingKind.YARN.value:
        directions = body.pop("directions", {}) or {}
        return YarnBinding(
            params=TransIsoParams.from_dict(body),
            source=directions.get("source", DirectionSource.MESH.value),
            axis=directions.get("axis"),
            inlet=directions.get("inlet"),
            outlet=directions.get("outlet"),
        )
    raise ParameterError("type", kind, "expected matrix, fibre or yarn")


@dataclass(frozen=True)
class RegionSpec:
    """Region id -> material binding."""
    bindings: Dict[int, Binding]

    def check(self, mesh: Mesh) -> None:
        """Every mesh region must be bound; extra bindings are reported."""
        missing = [r for r in mesh.regions if r not in self.bindings]
        if missing:
            raise ConfigError(None, f"mesh regions {missing} have no material binding")
        unused = sorted(set(self.bindings) - set(mesh.regions))
        if unused:
            logger.info("Bindings for regions %s match no elements", unused)

    def regions_of(self, kind: BindingKind) -> Tuple[int, ...]:
        return tuple(sorted(r for r, b in self.bindings.items() if b.kind is kind))

    @property
    def matrix_params(self) -> Optional[MatrixParams]:
        """Parameters of the first matrix region (sets solver tolerances)."""
        for region in self.regions_of(BindingKind.MATRIX):
            return self.bindings[region].params
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {str(r): b.to_dict() for r, b in sorted(self.bindings.items())}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RegionSpec":
        bindings: Dict[int, Binding] = {}
        for key, entry in d.items():
            try:
                region = int(key)
            except ValueError:
                raise ParameterError("regions", key, "region keys must be integers")
            bindings[region] = binding_from_dict(entry)
        return cls(bindings)
