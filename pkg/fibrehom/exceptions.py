"""
Fibrehom Exceptions

Custom exceptions for the fibrehom solver.

Configuration errors, mesh errors and solver errors form three branches so the
CLI can map each to its own exit status.
"""

from pathlib import Path
from typing import Any, Optional, Sequence, Tuple


class FibrehomError(Exception):
    """Base exception for all fibrehom errors."""
    pass


class ParameterError(FibrehomError):
    """Raised when a material or generator parameter is out of range."""

    def __init__(self, name: str, value: Any, reason: Optional[str] = None):
        self.name = name
        self.value = value
        self.reason = reason
        msg = f"Invalid parameter {name}={value!r}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class ConfigError(FibrehomError):
    """Raised when a run configuration is malformed or inconsistent."""

    def __init__(self, path: Optional[Path], reason: str):
        self.path = path
        self.reason = reason
        where = f" in {path}" if path else ""
        super().__init__(f"Invalid configuration{where}: {reason}")


# Mesh-side errors

class MeshError(FibrehomError):
    """Base class for mesh ingestion, generation and validation failures."""
    pass


class MeshFormatError(MeshError):
    """Raised when a mesh file cannot be parsed."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"Mesh format error at line {line}: {reason}")


class MeshValidationError(MeshError):
    """Raised when a mesh violates a structural invariant."""

    def __init__(self, reason: str, line: Optional[int] = None):
        self.reason = reason
        self.line = line
        msg = f"Invalid mesh: {reason}"
        if line is not None:
            msg += f" (line {line})"
        super().__init__(msg)


class PeriodicMatchError(MeshError):
    """Raised when opposite RVE faces do not match node for node."""

    def __init__(self, node_ids: Sequence[int], reason: Optional[str] = None):
        self.node_ids = list(node_ids)
        self.reason = reason
        shown = ", ".join(str(n) for n in self.node_ids[:10])
        if len(self.node_ids) > 10:
            shown += f", ... ({len(self.node_ids)} total)"
        msg = f"Unmatched periodic nodes [{shown}]"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class MeshingError(MeshError):
    """Raised when the built-in RVE mesher cannot produce a valid mesh."""

    def __init__(self, reason: str, fibres: Optional[Tuple[int, int]] = None):
        self.reason = reason
        self.fibres = fibres
        msg = f"Meshing failed: {reason}"
        if fibres is not None:
            msg += f" (fibres {fibres[0]} and {fibres[1]})"
        super().__init__(msg)


class LayoutError(MeshError):
    """Raised when the fibre generator cannot reach the target volume fraction."""

    def __init__(self, achieved_vf: float, target_vf: float, reason: Optional[str] = None):
        self.achieved_vf = achieved_vf
        self.target_vf = target_vf
        self.reason = reason
        msg = (
            f"Fibre layout reached vf={achieved_vf:.4f}, "
            f"target was {target_vf:.4f}"
        )
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


# Solver-side errors

class SolverError(FibrehomError):
    """Base class for constitutive and global solution failures."""
    pass


class ReturnMappingError(SolverError):
    """Raised when the local plastic return does not converge."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Return mapping did not converge in {iterations} iterations "
            f"(residual {residual:.3e}); strain increment too large"
        )


class MaterialEvaluationError(SolverError):
    """Raised when a constitutive update fails inside an element."""

    def __init__(self, element: int, reason: str):
        self.element = element
        self.reason = reason
        super().__init__(f"Material evaluation failed in element {element}: {reason}")


class ConstraintRankError(SolverError):
    """Raised when the boundary-constraint matrix is rank deficient."""

    def __init__(self, kind: str, reason: Optional[str] = None):
        self.kind = kind
        self.reason = reason
        msg = f"Constraint matrix for {kind} is rank deficient"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class SingularSystemError(SolverError):
    """Raised when the saddle-point matrix cannot be factorised."""

    def __init__(
        self,
        inertia: Optional[Tuple[int, int, int]] = None,
        reason: Optional[str] = None,
    ):
        self.inertia = inertia
        self.reason = reason
        msg = "Saddle-point matrix is singular"
        if inertia is not None:
            msg += f" (inertia +{inertia[0]} -{inertia[1]} 0:{inertia[2]})"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class ConvergenceError(SolverError):
    """
    Raised when a load step fails even after the smallest permitted bisection.

    result carries the steps converged before the failure, when known.
    """

    def __init__(
        self,
        step: int,
        last_good_strain: Any,
        residual: Optional[float] = None,
        reason: Optional[str] = None,
        result: Any = None,
    ):
        self.step = step
        self.last_good_strain = last_good_strain
        self.residual = residual
        self.reason = reason
        self.result = result
        msg = f"Load step {step} failed to converge"
        if residual is not None:
            msg += f" (residual {residual:.3e})"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
