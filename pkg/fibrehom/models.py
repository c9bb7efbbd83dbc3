"""
Fibrehom Data Models

Load programs and homogenisation results.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_STRESS_TOL
from .exceptions import ParameterError

COMPONENT_NAMES = ("11", "22", "33", "12", "23", "31")
_COMPONENT_ALIASES = {
    "xx": 0, "yy": 1, "zz": 2, "xy": 3, "yz": 4, "zx": 5,
    "yx": 3, "zy": 4, "xz": 5, "21": 3, "32": 4, "13": 5,
}


def parse_component(value: Union[int, str]) -> int:
    """Voigt slot from 0..5, '11'..'31' or 'xx'..'zx'."""
    if isinstance(value, (int, np.integer)) and 0 <= int(value) < 6:
        return int(value)
    key = str(value).strip().lower()
    if key in COMPONENT_NAMES:
        return COMPONENT_NAMES.index(key)
    if key in _COMPONENT_ALIASES:
        return _COMPONENT_ALIASES[key]
    raise ParameterError("component", value, "expected 0-5, 11..31 or xx..zx")


class StiffnessOutput(str, Enum):
    """When to extract the homogenised tangent C̄."""
    NONE = "none"
    LAST = "last"
    EVERY = "every"


class RunStatus(str, Enum):
    CONVERGED = "converged"
    FAILED = "failed"


@dataclass(frozen=True)
class LoadSegment:
    """
    Linear ramp from the previous target to this one.

    Attributes:
        target: Macro strain (strain-kind Voigt) at the end of the segment
        steps: Number of equal increments
    """
    target: Tuple[float, ...]
    steps: int = 1

    def __post_init__(self):
        target = tuple(float(v) for v in np.asarray(self.target, dtype=float).reshape(-1))
        if len(target) != 6:
            raise ParameterError("target", self.target, "needs six strain components")
        if not all(math.isfinite(v) for v in target):
            raise ParameterError("target", self.target, "strains must be finite")
        if int(self.steps) < 1:
            raise ParameterError("steps", self.steps, "must be at least 1")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "steps", int(self.steps))

    def to_dict(self) -> Dict[str, Any]:
        return {"target": list(self.target), "steps": self.steps}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "LoadSegment":
        if "target" in d:
            target = d["target"]
        else:
            # sparse form: {"strain": {"11": 0.01}, "steps": 10}
            target = [0.0] * 6
            for key, value in (d.get("strain") or {}).items():
                target[parse_component(key)] = float(value)
        return cls(target=tuple(target), steps=int(d.get("steps", 1)))


@dataclass(frozen=True)
class LoadProgram:
    """
    Strain-driven macro load program.

    Attributes:
        segments: Ramps applied one after another from ε̄ = 0
        free_components: Macro components held at zero stress instead of
            following the targets
        stress_tol: Zero-stress tolerance for free components, relative to
            the stress scale of the run
        stiffness: When to extract C̄
        snapshot_every: Keep a field snapshot every n steps (0: final only)
    """
    segments: Tuple[LoadSegment, ...]
    free_components: Tuple[int, ...] = ()
    stress_tol: float = DEFAULT_STRESS_TOL
    stiffness: StiffnessOutput = StiffnessOutput.NONE
    snapshot_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(
            self, "free_components", tuple(sorted({parse_component(c) for c in self.free_components}))
        )
        object.__setattr__(self, "stiffness", StiffnessOutput(self.stiffness))
        if not self.segments:
            raise ParameterError("program", [], "needs at least one segment")
        if len(self.free_components) == 6:
            raise ParameterError("free_components", self.free_components, "at least one component must be controlled")
        if self.stress_tol <= 0.0:
            raise ParameterError("stress_tol", self.stress_tol, "must be positive")
        if self.snapshot_every < 0:
            raise ParameterError("snapshot_every", self.snapshot_every, "must be non-negative")

    @property
    def n_steps(self) -> int:
        return sum(s.steps for s in self.segments)

    @property
    def controlled(self) -> Tuple[int, ...]:
        return tuple(i for i in range(6) if i not in self.free_components)

    def targets(self) -> Iterator[Tuple[int, np.ndarray]]:
        """(step, ε̄ target) for every step, numbered from 1."""
        start = np.zeros(6)
        step = 0
        for seg in self.segments:
            end = np.asarray(seg.target)
            for k in range(1, seg.steps + 1):
                step += 1
                yield step, start + (end - start) * (k / seg.steps)
            start = end

    def wants_stiffness(self, step: int) -> bool:
        if self.stiffness is StiffnessOutput.EVERY:
            return True
        return self.stiffness is StiffnessOutput.LAST and step == self.n_steps

    def wants_snapshot(self, step: int) -> bool:
        if step == self.n_steps:
            return True
        return self.snapshot_every > 0 and step % self.snapshot_every == 0

    @classmethod
    def uniaxial(cls, component: Union[int, str], strain: float, steps: int, free: Sequence = ()) -> "LoadProgram":
        """One ramp of a single strain component."""
        target = [0.0] * 6
        target[parse_component(component)] = strain
        return cls((LoadSegment(tuple(target), steps),), free_components=tuple(free))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "segments": [s.to_dict() for s in self.segments],
            "free_components": [COMPONENT_NAMES[c] for c in self.free_components],
            "stress_tol": self.stress_tol,
            "stiffness": self.stiffness.value,
            "snapshot_every": self.snapshot_every,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "LoadProgram":
        return cls(
            segments=tuple(LoadSegment.from_dict(s) for s in d.get("segments", [])),
            free_components=tuple(d.get("free_components", ())),
            stress_tol=float(d.get("stress_tol", DEFAULT_STRESS_TOL)),
            stiffness=d.get("stiffness", StiffnessOutput.NONE.value),
            snapshot_every=int(d.get("snapshot_every", 0)),
        )

    def __repr__(self) -> str:
        free = ",".join(COMPONENT_NAMES[c] for c in self.free_components) or "-"
        return f"LoadProgram(segments={len(self.segments)}, steps={self.n_steps}, free={free})"


@dataclass
class StepRecord:
    """
    One converged program step.

    Attributes:
        step: Program step number, 1-based
        strain: Macro strain ε̄
        stress: Homogenised stress Dᵀλ / V
        average_stress: Volume-averaged element stress
        boundary_work: λᵀ C u / V
        iterations: Newton iterations summed over substeps
        substeps: Number of substeps the step needed
        stiffness: C̄ when requested
    """
    step: int
    strain: np.ndarray
    stress: np.ndarray
    average_stress: np.ndarray
    boundary_work: float = 0.0
    iterations: int = 0
    substeps: int = 1
    stiffness: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "strain": np.asarray(self.strain).tolist(),
            "stress": np.asarray(self.stress).tolist(),
            "average_stress": np.asarray(self.average_stress).tolist(),
            "boundary_work": self.boundary_work,
            "iterations": self.iterations,
            "substeps": self.substeps,
            "stiffness": None if self.stiffness is None else np.asarray(self.stiffness).tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "StepRecord":
        stiffness = d.get("stiffness")
        return cls(
            step=int(d["step"]),
            strain=np.asarray(d["strain"], dtype=float),
            stress=np.asarray(d["stress"], dtype=float),
            average_stress=np.asarray(d.get("average_stress", d["stress"]), dtype=float),
            boundary_work=float(d.get("boundary_work", 0.0)),
            iterations=int(d.get("iterations", 0)),
            substeps=int(d.get("substeps", 1)),
            stiffness=None if stiffness is None else np.asarray(stiffness, dtype=float),
        )


@dataclass
class FieldSnapshot:
    """
    Fields of one converged step for visualisation.

    Attributes:
        step: Program step number
        displacement: (n_nodes, 3) nodal displacements
        plastic_strain: (n_tets,) equivalent plastic strain, zero off the matrix
        damage: (n_cohesive,) mean interface damage
    """
    step: int
    displacement: np.ndarray
    plastic_strain: np.ndarray
    damage: np.ndarray


@dataclass
class HomogenizedResult:
    """
    Outcome of a load program.

    Attributes:
        kind: Boundary-condition kind value
        volume: RVE volume
        steps: Converged steps in order
        snapshots: Field snapshots kept by the program
        status: converged, or failed with the steps reached so far
        message: Failure diagnostic
    """
    kind: str
    volume: float
    steps: List[StepRecord] = field(default_factory=list)
    snapshots: List[FieldSnapshot] = field(default_factory=list)
    status: RunStatus = RunStatus.CONVERGED
    message: Optional[str] = None

    @property
    def strains(self) -> np.ndarray:
        return np.array([s.strain for s in self.steps]).reshape(-1, 6)

    @property
    def stresses(self) -> np.ndarray:
        return np.array([s.stress for s in self.steps]).reshape(-1, 6)

    @property
    def last_stiffness(self) -> Optional[np.ndarray]:
        for record in reversed(self.steps):
            if record.stiffness is not None:
                return record.stiffness
        return None

    def peak(self, component: Union[int, str] = 0) -> Tuple[float, float]:
        """(stress, strain) where the given stress component is largest."""
        c = parse_component(component)
        if not self.steps:
            return 0.0, 0.0
        i = int(np.argmax(self.stresses[:, c]))
        return float(self.stresses[i, c]), float(self.strains[i, c])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "volume": self.volume,
            "status": self.status.value,
            "message": self.message,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "HomogenizedResult":
        return cls(
            kind=d["kind"],
            volume=float(d["volume"]),
            steps=[StepRecord.from_dict(s) for s in d.get("steps", [])],
            status=RunStatus(d.get("status", RunStatus.CONVERGED.value)),
            message=d.get("message"),
        )

    def __repr__(self) -> str:
        return (
            f"HomogenizedResult(kind={self.kind}, steps={len(self.steps)}, "
            f"status={self.status.value})"
        )
