"""
Fibrehom Materials

Constitutive models: elasto-plastic matrix, transversely isotropic yarns and
fibres, cohesive interfaces, and the region-to-material bindings.
"""

from .cohesive import CohesiveParams, CohesiveState, cohesive_element, damage, effective_jump, traction
from .matrix import (
    HardeningLaw,
    HardeningSplit,
    MaterialResponse,
    MatrixParams,
    PlasticState,
    consistent_tangent_check,
    drive_material_point,
    elastic_stiffness,
    hardened_strengths,
    potential_value,
    return_map,
    yield_value,
)
from .regions import BindingKind, DirectionSource, FibreBinding, MatrixBinding, RegionSpec, YarnBinding
from .yarn import (
    DirectionField,
    TransIsoParams,
    element_stiffness_global,
    isotropic_from_fibre,
    local_stiffness,
    potential_flow_directions,
)

__all__ = [
    "BindingKind",
    "CohesiveParams",
    "CohesiveState",
    "DirectionField",
    "DirectionSource",
    "FibreBinding",
    "HardeningLaw",
    "HardeningSplit",
    "MaterialResponse",
    "MatrixBinding",
    "MatrixParams",
    "PlasticState",
    "RegionSpec",
    "TransIsoParams",
    "YarnBinding",
    "cohesive_element",
    "consistent_tangent_check",
    "damage",
    "drive_material_point",
    "effective_jump",
    "elastic_stiffness",
    "element_stiffness_global",
    "hardened_strengths",
    "isotropic_from_fibre",
    "local_stiffness",
    "potential_flow_directions",
    "potential_value",
    "return_map",
    "traction",
    "yield_value",
]
