"""
Fibrehom - FE Homogenisation of Fibre-Composite RVEs

Small-strain finite element homogenisation of representative volume elements
of fibre composites: elasto-plastic matrix, transversely isotropic fibres and
yarns, cohesive fibre/matrix interfaces, and three families of RVE boundary
conditions solved as one saddle-point system.

Key Features:
    - Paraboloidal-yield matrix plasticity with non-associative flow
    - Random UD fibre layouts with a periodic tetrahedral mesher
    - Cohesive interfaces with linear softening
    - Linear displacement, periodic and uniform traction boundary conditions
    - Homogenised stress and consistent homogenised stiffness per step
    - Mixed strain/stress load programs with automatic bisection

Basic Usage:
    from fibrehom import load_run_config, execute

    outcome = execute(load_run_config("configs/ud_gfrp/rve1.json"))
    print(outcome.result.peak(0))

Environment Variables:
    FIBREHOM_THREADS     - Worker count for sweeps
    FIBREHOM_LOG_LEVEL   - Log level name
    FIBREHOM_OUTPUT_DIR  - Output directory when a config names none
"""

__version__ = "0.1.0"

# Configuration
from .config import (
    ENV_LOG_LEVEL,
    ENV_OUTPUT_DIR,
    ENV_THREADS,
    FibrehomSettings,
    get_settings,
    reset_settings,
    set_settings,
)

# Exceptions
from .exceptions import (
    ConfigError,
    ConstraintRankError,
    ConvergenceError,
    FibrehomError,
    LayoutError,
    MaterialEvaluationError,
    MeshError,
    MeshFormatError,
    MeshingError,
    MeshValidationError,
    ParameterError,
    PeriodicMatchError,
    ReturnMappingError,
    SingularSystemError,
    SolverError,
)

# Tensors
from .tensors import Basis3, Voigt6, VoigtKind, coordinate_matrix, isotropic_stiffness

# Materials
from .materials import (
    CohesiveParams,
    MatrixParams,
    RegionSpec,
    TransIsoParams,
    drive_material_point,
    return_map,
)

# Meshes and layouts
from .mesh import Mesh, mesh_quality, read_mesh, validate_mesh, write_mesh
from .layout import FibreLayout, GenParams, generate_layout
from .mesher import insert_cohesive, mesh_ud_rve, stack_laminae, structured_box_mesh

# Homogenisation
from .constraints import BCKind, ConstraintSystem, build_constraints
from .models import HomogenizedResult, LoadProgram, LoadSegment, StepRecord
from .solver import RVESolver, SolverOptions, run_program

# Runs
from .run_config import RunConfig, load_run_config
from .driver import execute, run_sweep

__all__ = [
    # Version
    "__version__",

    # Configuration
    "FibrehomSettings",
    "get_settings",
    "set_settings",
    "reset_settings",
    "ENV_THREADS",
    "ENV_LOG_LEVEL",
    "ENV_OUTPUT_DIR",

    # Exceptions
    "FibrehomError",
    "ParameterError",
    "ConfigError",
    "MeshError",
    "MeshFormatError",
    "MeshValidationError",
    "PeriodicMatchError",
    "MeshingError",
    "LayoutError",
    "SolverError",
    "ReturnMappingError",
    "MaterialEvaluationError",
    "ConstraintRankError",
    "SingularSystemError",
    "ConvergenceError",

    # Tensors
    "Voigt6",
    "VoigtKind",
    "Basis3",
    "coordinate_matrix",
    "isotropic_stiffness",

    # Materials
    "MatrixParams",
    "TransIsoParams",
    "CohesiveParams",
    "RegionSpec",
    "return_map",
    "drive_material_point",

    # Meshes and layouts
    "Mesh",
    "read_mesh",
    "write_mesh",
    "validate_mesh",
    "mesh_quality",
    "GenParams",
    "FibreLayout",
    "generate_layout",
    "mesh_ud_rve",
    "structured_box_mesh",
    "insert_cohesive",
    "stack_laminae",

    # Homogenisation
    "BCKind",
    "ConstraintSystem",
    "build_constraints",
    "LoadSegment",
    "LoadProgram",
    "StepRecord",
    "HomogenizedResult",
    "SolverOptions",
    "RVESolver",
    "run_program",

    # Runs
    "RunConfig",
    "load_run_config",
    "execute",
    "run_sweep",
]
