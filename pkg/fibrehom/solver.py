"""
Fibrehom RVE Solver

Newton-Raphson solution of the constrained RVE problem

    [K  Cᵀ] [Δu]   [Cᵀλ − F_int]
    [C  0 ] [ μ] = [Dε̄ − C u   ],     Δλ = −μ

with automatic step bisection, homogenised stress σ̄ = Dᵀλ / V, the
homogenised tangent from six unit macro strains on one factorisation,
and macro mixed control for components held at zero stress.

Usage:
    from fibrehom.solver import RVESolver

    solver = RVESolver(mesh, regions, BCKind.PERIODIC, interface)
    result = solver.run_program(LoadProgram.uniaxial("11", 0.01, 50))
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import splu

from .assembly import Assembler, Assembly
from .config import (
    DEFAULT_LOCAL_MAX_ITERATIONS,
    DEFAULT_LOCAL_TOL,
    DEFAULT_MAX_BISECTIONS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MIXED_MAX_ITERATIONS,
    DEFAULT_NEWTON_RTOL,
)
from .constraints import BCKind, ConstraintSystem, boundary_work, build_constraints
from .exceptions import ConvergenceError, ParameterError, SingularSystemError, SolverError
from .materials.cohesive import CohesiveParams
from .materials.regions import RegionSpec
from .mesh import Mesh
from .models import FieldSnapshot, HomogenizedResult, LoadProgram, RunStatus, StepRecord

logger = logging.getLogger(__name__)

ATOL_FACTOR = 1e-10
CONSTRAINT_TOL = 1e-10
INERTIA_LIMIT = 4000
DIVERGENCE_RATIO = 1e8


@dataclass(frozen=True)
class SolverOptions:
    """
    Global solver tolerances.

    Attributes:
        rtol: Relative force-residual tolerance
        atol: Absolute force-residual tolerance; 1e-10·σt0·V^(2/3) when None
        max_iterations: Newton iterations per attempt
        max_bisections: Halvings of a program step before giving up
        local_tol: Return-map tolerance
        local_max_iterations: Return-map iteration cap
        mixed_max_iterations: Corrections of free macro strains per step
    """
    rtol: float = DEFAULT_NEWTON_RTOL
    atol: Optional[float] = None
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    max_bisections: int = DEFAULT_MAX_BISECTIONS
    local_tol: float = DEFAULT_LOCAL_TOL
    local_max_iterations: int = DEFAULT_LOCAL_MAX_ITERATIONS
    mixed_max_iterations: int = DEFAULT_MIXED_MAX_ITERATIONS

    def __post_init__(self):
        if not 0.0 < self.rtol < 1.0:
            raise ParameterError("rtol", self.rtol, "must lie in (0, 1)")
        if self.atol is not None and self.atol < 0.0:
            raise ParameterError("atol", self.atol, "must be non-negative")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations", self.max_iterations, "must be positive")
        if self.max_bisections < 0:
            raise ParameterError("max_bisections", self.max_bisections, "must be non-negative")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "max_iterations": self.max_iterations,
            "max_bisections": self.max_bisections,
            "local_tol": self.local_tol,
            "local_max_iterations": self.local_max_iterations,
            "mixed_max_iterations": self.mixed_max_iterations,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SolverOptions":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError("tolerances", sorted(unknown), "unknown keys")
        return cls(**d)


@dataclass
class NewtonReport:
    """Iteration count and force-residual norms of one Newton solve."""
    iterations: int
    residuals: List[float] = field(default_factory=list)

    @property
    def observed_order(self) -> Optional[float]:
        """log(r_k+1 / r_k) / log(r_k / r_k-1) over the last three residuals."""
        r = [x for x in self.residuals if x > 0.0]
        if len(r) < 3:
            return None
        a, b, c = r[-3:]
        if a == b or b == c:
            return None
        return math.log(c / b) / math.log(b / a)


@dataclass
class NewtonResult:
    u: np.ndarray
    lam: np.ndarray
    assembly: Assembly
    report: NewtonReport


def homogenized_stress(system: ConstraintSystem, lam: np.ndarray) -> np.ndarray:
    """σ̄ = Dᵀλ / V."""
    return system.D.T @ lam / system.volume


def constraint_scale(K: sparse.spmatrix, system: ConstraintSystem) -> float:
    """Row scaling that brings C to the magnitude of the stiffness diagonal."""
    k_size = float(np.mean(np.abs(K.diagonal())))
    c_size = float(np.max(np.abs(system.C.data))) if system.C.nnz else 1.0
    return k_size / c_size if k_size > 0.0 else 1.0


def saddle_matrix(K: sparse.spmatrix, system: ConstraintSystem, scale: float = 1.0) -> sparse.csc_matrix:
    """[K, sCᵀ; sC, 0]; multipliers of the scaled system are μ / s."""
    c = scale * system.C
    return sparse.bmat([[K, c.T], [c, None]], format="csc")


def inertia(matrix: sparse.spmatrix, tol: float = 1e-12) -> Optional[Tuple[int, int, int]]:
    """
    (positive, negative, zero) eigenvalue counts from a dense LDLᵀ.

    Returns None above INERTIA_LIMIT unknowns.
    """
    n = matrix.shape[0]
    if n > INERTIA_LIMIT:
        return None
    dense = matrix.toarray()
    _, d, _ = scipy.linalg.ldl(0.5 * (dense + dense.T))
    eig = np.linalg.eigvalsh(d)
    cut = tol * max(np.max(np.abs(eig)), 1.0)
    return int(np.sum(eig > cut)), int(np.sum(eig < -cut)), int(np.sum(np.abs(eig) <= cut))


def factorize(matrix: sparse.csc_matrix):
    """
    Sparse LU of the saddle matrix.

    Raises:
        SingularSystemError: With the inertia for small systems
    """
    try:
        lu = splu(matrix)
    except RuntimeError as exc:
        raise SingularSystemError(inertia(matrix), str(exc)) from exc
    pivots = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-14 * pivots.max():
        raise SingularSystemError(inertia(matrix), "vanishing pivot")
    return lu


def _free_block_solve(
    c_bar: np.ndarray, free: List[int], rhs: np.ndarray, step: int, strain: np.ndarray
) -> np.ndarray:
    """
    Solve the free-free block of the homogenised tangent.

    Raises:
        ConvergenceError: If the block is singular or the solution is not finite
    """
    reason = "homogenised tangent is singular on the free components"
    try:
        x = np.linalg.solve(c_bar[np.ix_(free, free)], rhs)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(step, strain.copy(), None, reason) from exc
    if not np.all(np.isfinite(x)):
        raise ConvergenceError(step, strain.copy(), None, reason)
    return x


def homogenized_stiffness(
    system: ConstraintSystem, K: sparse.spmatrix, scale: Optional[float] = None
) -> np.ndarray:
    """
    C̄ from one factorisation and six unit macro strains.

    Args:
        system: Constraint system
        K: Tangent stiffness of a converged state
        scale: Constraint row scaling (constraint_scale(K) when None)

    Returns:
        (6, 6) homogenised tangent; column k is the stress answer to ε̄ = e_k
    """
    n = K.shape[0]
    s = constraint_scale(K, system) if scale is None else scale
    lu = factorize(saddle_matrix(K, system, s))
    rhs = np.zeros((n + system.n_lambda, 6))
    rhs[n:] = s * system.D
    sol = lu.solve(rhs)
    return -s * system.D.T @ sol[n:] / system.volume


class RVESolver:
    """
    One RVE analysis: constraints, assembly and the converged history.

    Args:
        mesh: Validated mesh (with periodic_pairs for PERIODIC)
        regions: Material bindings
        kind: Boundary-condition kind
        interface: Cohesive constants when the mesh has interfaces
        options: Solver tolerances
    """

    def __init__(
        self,
        mesh: Mesh,
        regions: RegionSpec,
        kind: BCKind,
        interface: Optional[CohesiveParams] = None,
        options: Optional[SolverOptions] = None,
    ):
        self.options = options or SolverOptions()
        self.kind = BCKind.parse(kind) if not isinstance(kind, BCKind) else kind
        self.assembler = Assembler(
            mesh,
            regions,
            interface,
            local_tol=self.options.local_tol,
            local_max_iterations=self.options.local_max_iterations,
        )
        self.system = build_constraints(mesh, self.kind, self.assembler.dofmap)
        self.volume = self.system.volume
        matrix = regions.matrix_params
        self.stress_scale = matrix.sigma_t0 if matrix is not None else 1.0
        self.scale = constraint_scale(
            self.assembler.assemble(np.zeros(self.assembler.n_dofs), self.assembler.initial_state()).K,
            self.system,
        )
        self.atol = (
            self.options.atol
            if self.options.atol is not None
            else ATOL_FACTOR * self.stress_scale * self.volume ** (2.0 / 3.0)
        )
        self.reset()

    def reset(self) -> None:
        """Back to the undeformed, virgin state."""
        self.u = np.zeros(self.assembler.n_dofs)
        self.lam = np.zeros(self.system.n_lambda)
        self.state = self.assembler.initial_state()
        self.strain = np.zeros(6)
        self.converged: Optional[Assembly] = None
        self._tangent: Optional[np.ndarray] = None

    @property
    def n_unknowns(self) -> int:
        return self.assembler.n_dofs + self.system.n_lambda

    def _save(self):
        return self.u.copy(), self.lam.copy(), self.state.copy(), self.strain.copy(), self.converged

    def _restore(self, saved) -> None:
        self.u, self.lam, self.state, self.strain, self.converged = (
            saved[0].copy(), saved[1].copy(), saved[2].copy(), saved[3].copy(), saved[4],
        )

    def newton_solve(self, eps_target: np.ndarray) -> NewtonResult:
        """
        Equilibrium at macro strain eps_target from the converged history.

        Does not commit; see commit().

        Raises:
            ConvergenceError: No convergence within max_iterations
            SingularSystemError: Saddle matrix cannot be factorised
            MaterialEvaluationError: A constitutive update failed
        """
        C = self.system.C
        n = self.assembler.n_dofs
        eps = np.asarray(eps_target, dtype=float).reshape(6)
        d_eps = self.system.D @ eps
        u = self.u.copy()
        lam = self.lam.copy()
        residuals: List[float] = []
        res = math.inf
        for iteration in range(self.options.max_iterations + 1):
            asm = self.assembler.assemble(u, self.state)
            reaction = C.T @ lam
            r_u = reaction - asm.F_int
            cu = C @ u
            r_c = d_eps - cu
            res = float(np.linalg.norm(r_u))
            c_res = float(np.linalg.norm(r_c))
            reference = max(float(np.linalg.norm(asm.F_int)), float(np.linalg.norm(reaction)))
            residuals.append(res)
            logger.debug(
                "newton %d: |r_u|=%.3e (ref %.3e) |r_c|=%.3e", iteration, res, reference, c_res
            )
            if not (math.isfinite(res) and math.isfinite(c_res)):
                raise ConvergenceError(0, self.strain.copy(), res, "non-finite residual")
            c_scale = float(np.linalg.norm(d_eps)) + float(np.linalg.norm(cu))
            if res <= self.options.rtol * reference + self.atol and c_res <= CONSTRAINT_TOL * c_scale:
                return NewtonResult(u, lam, asm, NewtonReport(iteration, residuals))
            if iteration >= 3 and res > DIVERGENCE_RATIO * max(residuals[1], self.atol):
                raise ConvergenceError(0, self.strain.copy(), res, "residual diverging")
            if iteration == self.options.max_iterations:
                break
            lu = factorize(saddle_matrix(asm.K, self.system, self.scale))
            sol = lu.solve(np.concatenate((r_u, self.scale * r_c)))
            u = u + sol[:n]
            lam = lam - self.scale * sol[n:]
        raise ConvergenceError(
            0, self.strain.copy(), res, f"no convergence in {self.options.max_iterations} iterations"
        )

    def commit(self, result: NewtonResult, eps: np.ndarray) -> None:
        self.u = result.u
        self.lam = result.lam
        self.state = result.assembly.state
        self.strain = np.asarray(eps, dtype=float).copy()
        self.converged = result.assembly

    def homogenized_stress(self) -> np.ndarray:
        return homogenized_stress(self.system, self.lam)

    def average_stress(self) -> np.ndarray:
        """Volume average of element stresses at the converged state."""
        if self.converged is None:
            return np.zeros(6)
        return self.assembler.average_stress(self.converged.stress)

    def homogenized_stiffness(self) -> np.ndarray:
        """C̄ at the converged state (elastic C̄ before the first step)."""
        asm = self.converged or self.assembler.assemble(self.u, self.state)
        return homogenized_stiffness(self.system, asm.K, self.scale)

    def boundary_work(self) -> float:
        return boundary_work(self.system, self.u, self.lam)

    def advance(self, eps_target: np.ndarray, step: int = 0) -> Tuple[int, int]:
        """
        Move from the committed strain to eps_target, bisecting on failure.

        Returns:
            (Newton iterations, substeps)

        Raises:
            ConvergenceError: When a substep of the smallest size fails
        """
        start = self.strain.copy()
        target = np.asarray(eps_target, dtype=float).reshape(6)
        min_size = 0.5 ** self.options.max_bisections
        done, size = 0.0, 1.0
        iterations = substeps = 0
        while done < 1.0 - 1e-12:
            size = min(size, 1.0 - done)
            eps = start + (done + size) * (target - start)
            try:
                result = self.newton_solve(eps)
            except SolverError as exc:
                if size <= min_size * (1.0 + 1e-9):
                    raise ConvergenceError(
                        step, self.strain.copy(), getattr(exc, "residual", None), str(exc)
                    ) from exc
                size *= 0.5
                logger.warning("Step %d: bisecting to %.6g of the step (%s)", step, size, exc)
                continue
            self.commit(result, eps)
            done += size
            iterations += result.report.iterations
            substeps += 1
            size = min(1.0, 2.0 * size)
        return iterations, substeps

    def solve_step(self, eps_target: np.ndarray, program: LoadProgram, step: int = 0) -> Tuple[int, int]:
        """
        One program step, driving free macro stresses to zero.

        Free components of eps_target are ignored; their strains come from
        Newton corrections on the homogenised tangent.
        """
        free = list(program.free_components)
        target = np.asarray(eps_target, dtype=float).reshape(6).copy()
        if not free:
            return self.advance(target, step)

        ctrl = list(program.controlled)
        if self._tangent is None:
            self._tangent = self.homogenized_stiffness()
        c_bar = self._tangent
        target[free] = self.strain[free] - _free_block_solve(
            c_bar, free, c_bar[np.ix_(free, ctrl)] @ (target[ctrl] - self.strain[ctrl]),
            step, self.strain,
        )
        saved = self._save()
        iterations = substeps = 0
        for correction in range(self.options.mixed_max_iterations):
            its, subs = self.advance(target, step)
            iterations += its
            substeps += subs
            sigma = self.homogenized_stress()
            tol = max(
                program.stress_tol * self.stress_scale,
                10.0 * self.options.rtol * float(np.max(np.abs(sigma))),
            )
            self._tangent = self.homogenized_stiffness()
            if np.max(np.abs(sigma[free])) <= tol:
                logger.debug("step %d: free stresses vanished after %d corrections", step, correction)
                return iterations, substeps
            c_bar = self._tangent
            self._restore(saved)
            target[free] -= _free_block_solve(c_bar, free, sigma[free], step, self.strain)
        raise ConvergenceError(
            step, saved[3], float(np.max(np.abs(sigma[free]))), "free macro stresses did not vanish"
        )

    def snapshot(self, step: int) -> FieldSnapshot:
        damage = np.zeros(self.assembler.mesh.n_cohesive)
        if self.converged is not None and len(damage):
            damage = self.converged.damage.mean(axis=1)
        return FieldSnapshot(
            step=step,
            displacement=self.system.dofmap.expand(self.u),
            plastic_strain=self.assembler.plastic_strain_field(self.state),
            damage=damage,
        )

    def run_program(
        self,
        program: LoadProgram,
        on_step: Optional[Callable[[StepRecord], None]] = None,
    ) -> HomogenizedResult:
        """
        Step through a load program from the current state.

        Args:
            program: Load program
            on_step: Called with each StepRecord as it converges

        Returns:
            HomogenizedResult with one record per step

        Raises:
            ConvergenceError: With .result holding the steps reached
        """
        result = HomogenizedResult(self.kind.value, self.volume)
        logger.info("Running %r with %s constraints", program, self.kind.value)
        for step, target in program.targets():
            try:
                iterations, substeps = self.solve_step(target, program, step)
            except SolverError as exc:
                result.status = RunStatus.FAILED
                result.message = str(exc)
                logger.error("Step %d failed; last good strain %s", step, np.round(self.strain, 8))
                reason = exc.reason if isinstance(exc, ConvergenceError) else str(exc)
                raise ConvergenceError(
                    step, self.strain.copy(), getattr(exc, "residual", None), reason, result
                ) from exc
            record = StepRecord(
                step=step,
                strain=self.strain.copy(),
                stress=self.homogenized_stress(),
                average_stress=self.average_stress(),
                boundary_work=self.boundary_work() / self.volume,
                iterations=iterations,
                substeps=substeps,
            )
            if program.wants_stiffness(step):
                record.stiffness = self.homogenized_stiffness()
            if program.wants_snapshot(step):
                result.snapshots.append(self.snapshot(step))
            result.steps.append(record)
            logger.info(
                "Step %d/%d: eps=%s sigma=%s (%d iterations, %d substeps)",
                step, program.n_steps, np.round(record.strain, 6), np.round(record.stress, 4),
                iterations, substeps,
            )
            if on_step is not None:
                on_step(record)
        return result


def run_program(
    mesh: Mesh,
    regions: RegionSpec,
    program: LoadProgram,
    kind: BCKind,
    interface: Optional[CohesiveParams] = None,
    options: Optional[SolverOptions] = None,
) -> HomogenizedResult:
    """Fresh solver, one program."""
    return RVESolver(mesh, regions, kind, interface, options).run_program(program)
