"""
Fibrehom Assembly

Global tangent stiffness and internal force of an RVE mesh: linear tets
with elastic, yarn or elasto-plastic matrix response, plus 6-node cohesive
interfaces.

Elastic tets use one integration point. Tets in a plastic matrix region
carry history at four points; the strain of a linear tet is constant, so
points with equal history share one constitutive evaluation.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from .config import DEFAULT_LOCAL_MAX_ITERATIONS, DEFAULT_LOCAL_TOL
from .constraints import DofMap
from .exceptions import ConfigError, MaterialEvaluationError, ReturnMappingError
from .materials.cohesive import CohesiveParams, cohesive_elements
from .materials.matrix import MatrixParams, PlasticState, elastic_stiffness, return_map
from .materials.regions import BindingKind, RegionSpec
from .materials.yarn import local_stiffness, stiffness_for_directions
from .mesh import Mesh, tet_shape_gradients

logger = logging.getLogger(__name__)

PLASTIC_POINTS = 4


def strain_operators(grads: np.ndarray) -> np.ndarray:
    """
    Engineering-strain operators of linear tets.

    Args:
        grads: (m, 4, 3) shape-function gradients

    Returns:
        (m, 6, 12) B with ε = B u_e, u_e ordered node by node
    """
    m = grads.shape[0]
    b = np.zeros((m, 6, 12))
    for a in range(4):
        gx, gy, gz = grads[:, a, 0], grads[:, a, 1], grads[:, a, 2]
        c = 3 * a
        b[:, 0, c] = gx
        b[:, 1, c + 1] = gy
        b[:, 2, c + 2] = gz
        b[:, 3, c], b[:, 3, c + 1] = gy, gx
        b[:, 4, c + 1], b[:, 4, c + 2] = gz, gy
        b[:, 5, c], b[:, 5, c + 2] = gz, gx
    return b


@dataclass
class MaterialState:
    """
    History arrays of one mesh.

    Attributes:
        eps_p: (n_plastic, 4, 6) plastic strains of plastic-matrix tets
        alpha: (n_plastic, 4, 2) tension and compression internal variables
        kappa: (n_cohesive, 3) interface histories
    """
    eps_p: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray

    @classmethod
    def initial(cls, n_plastic: int, n_cohesive: int) -> "MaterialState":
        return cls(
            eps_p=np.zeros((n_plastic, PLASTIC_POINTS, 6)),
            alpha=np.zeros((n_plastic, PLASTIC_POINTS, 2)),
            kappa=np.zeros((n_cohesive, 3)),
        )

    def copy(self) -> "MaterialState":
        return MaterialState(self.eps_p.copy(), self.alpha.copy(), self.kappa.copy())


@dataclass
class Assembly:
    """
    Result of one global assembly.

    Attributes:
        K: Sparse tangent stiffness
        F_int: Internal force vector
        state: Trial history consistent with u
        stress: (n_tets, 6) element stresses (point average for plastic tets)
        damage: (n_cohesive, 3) interface damage, zeros when tied
        plastic_points: Number of integration points that yielded
    """
    K: sparse.csr_matrix
    F_int: np.ndarray
    state: MaterialState
    stress: np.ndarray
    damage: np.ndarray
    plastic_points: int = 0


class Assembler:
    """
    Precomputed element data and the assembly loop for one mesh.

    Args:
        mesh: Validated mesh
        regions: Material binding of every region
        interface: Cohesive constants, required when the mesh has cohesive
            elements; a tied interface aliases the node pairs instead
        dofmap: Dof numbering (built from the mesh when None)
    """

    def __init__(
        self,
        mesh: Mesh,
        regions: RegionSpec,
        interface: Optional[CohesiveParams] = None,
        dofmap: Optional[DofMap] = None,
        local_tol: float = DEFAULT_LOCAL_TOL,
        local_max_iterations: int = DEFAULT_LOCAL_MAX_ITERATIONS,
    ):
        regions.check(mesh)
        if mesh.n_cohesive and interface is None:
            raise ConfigError(None, "mesh has cohesive elements but no interface is configured")
        self.mesh = mesh
        self.regions = regions
        self.interface = interface
        self.tied = interface is not None and interface.tied
        self.dofmap = dofmap or DofMap.for_mesh(mesh, tie_cohesive=self.tied)
        self.local_tol = local_tol
        self.local_max_iterations = local_max_iterations

        grads, self.volumes = tet_shape_gradients(mesh.nodes, mesh.tets)
        self.B = strain_operators(grads)
        self.tet_dofs = self.dofmap.node_dofs(mesh.tets).reshape(-1, 12)
        self.stiffness = np.zeros((mesh.n_tets, 6, 6))

        self.plastic_groups: List[Tuple[MatrixParams, np.ndarray]] = []
        plastic_elements = []
        for region, binding in sorted(regions.bindings.items()):
            elems = np.nonzero(mesh.tet_regions == region)[0]
            if len(elems) == 0:
                continue
            if binding.kind is BindingKind.MATRIX:
                self.stiffness[elems] = elastic_stiffness(binding.params)
                if binding.params.plastic:
                    start = sum(len(e) for e in plastic_elements)
                    self.plastic_groups.append((binding.params, np.arange(start, start + len(elems))))
                    plastic_elements.append(elems)
            elif binding.kind is BindingKind.FIBRE:
                self.stiffness[elems] = local_stiffness(binding.params)
            else:
                directions = binding.directions(mesh, region)
                self.stiffness[directions.elements] = stiffness_for_directions(
                    binding.params, directions.vectors
                )
        self.plastic_elements = (
            np.concatenate(plastic_elements) if plastic_elements else np.zeros(0, dtype=np.int64)
        )

        self.cohesive_active = mesh.n_cohesive > 0 and not self.tied
        if self.cohesive_active:
            self.cohesive_coords = mesh.nodes[mesh.cohesive]
            self.cohesive_dofs = self.dofmap.node_dofs(mesh.cohesive).reshape(-1, 18)

        self._rows, self._cols = self._pattern()
        logger.info(
            "Assembler: %d dofs, %d tets (%d plastic), %d cohesive%s",
            self.n_dofs, mesh.n_tets, len(self.plastic_elements), mesh.n_cohesive,
            " (tied)" if self.tied else "",
        )

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    @property
    def volume(self) -> float:
        return float(self.volumes.sum())

    def initial_state(self) -> MaterialState:
        return MaterialState.initial(len(self.plastic_elements), self.mesh.n_cohesive)

    def _pattern(self) -> Tuple[np.ndarray, np.ndarray]:
        blocks = [self.tet_dofs]
        if self.cohesive_active:
            blocks.append(self.cohesive_dofs)
        rows, cols = [], []
        for dofs in blocks:
            n = dofs.shape[1]
            rows.append(np.repeat(dofs, n, axis=1).ravel())
            cols.append(np.tile(dofs, (1, n)).ravel())
        return np.concatenate(rows), np.concatenate(cols)

    def element_strains(self, u: np.ndarray) -> np.ndarray:
        """(n_tets, 6) engineering strains."""
        return np.einsum("mij,mj->mi", self.B, np.asarray(u)[self.tet_dofs])

    def _plastic_update(
        self,
        eps: np.ndarray,
        state: MaterialState,
        sigma: np.ndarray,
        tangent: np.ndarray,
        trial: MaterialState,
    ) -> int:
        yielded = 0
        for params, slots in self.plastic_groups:
            for slot in slots:
                element = int(self.plastic_elements[slot])
                eps_p = state.eps_p[slot]
                alpha = state.alpha[slot]
                shared = np.all(eps_p == eps_p[0]) and np.all(alpha == alpha[0])
                points = (0,) if shared else range(PLASTIC_POINTS)
                sig_sum = np.zeros(6)
                tan_sum = np.zeros((6, 6))
                for q in points:
                    history = PlasticState(eps_p[q], float(alpha[q, 0]), float(alpha[q, 1]))
                    try:
                        response = return_map(
                            eps[element], history, params, self.local_tol, self.local_max_iterations
                        )
                    except ReturnMappingError as exc:
                        raise MaterialEvaluationError(element, str(exc)) from exc
                    sig_sum += response.sigma
                    tan_sum += response.tangent
                    new = response.state_new
                    if shared:
                        trial.eps_p[slot] = new.eps_p
                        trial.alpha[slot] = (new.alpha0, new.alpha1)
                    else:
                        trial.eps_p[slot, q] = new.eps_p
                        trial.alpha[slot, q] = (new.alpha0, new.alpha1)
                    yielded += int(response.plastic) * (PLASTIC_POINTS if shared else 1)
                sigma[element] = sig_sum / len(points)
                tangent[element] = tan_sum / len(points)
        return yielded

    def assemble(self, u: np.ndarray, state: MaterialState) -> Assembly:
        """
        Tangent and internal force at displacement u from converged history.

        Args:
            u: Dof vector
            state: Converged history of the previous step (not modified)

        Returns:
            Assembly with the trial history

        Raises:
            MaterialEvaluationError: If a constitutive update fails
        """
        u = np.asarray(u, dtype=float)
        eps = self.element_strains(u)
        sigma = np.einsum("mij,mj->mi", self.stiffness, eps)
        tangent = self.stiffness
        trial = state.copy()
        yielded = 0
        if len(self.plastic_elements):
            tangent = self.stiffness.copy()
            yielded = self._plastic_update(eps, state, sigma, tangent, trial)

        k_blocks = [np.einsum("m,mki,mkl,mlj->mij", self.volumes, self.B, tangent, self.B)]
        f_blocks = [np.einsum("m,mki,mk->mi", self.volumes, self.B, sigma)]
        f_dofs = [self.tet_dofs]
        damage = np.zeros((self.mesh.n_cohesive, 3))
        if self.cohesive_active:
            k_c, f_c, trial.kappa, damage = cohesive_elements(
                self.cohesive_coords, u[self.cohesive_dofs], state.kappa, self.interface
            )
            k_blocks.append(k_c)
            f_blocks.append(f_c)
            f_dofs.append(self.cohesive_dofs)

        data = np.concatenate([k.ravel() for k in k_blocks])
        k_global = sparse.coo_matrix(
            (data, (self._rows, self._cols)), shape=(self.n_dofs, self.n_dofs)
        ).tocsr()
        f_int = np.bincount(
            np.concatenate([d.ravel() for d in f_dofs]),
            weights=np.concatenate([f.ravel() for f in f_blocks]),
            minlength=self.n_dofs,
        )
        return Assembly(k_global, f_int, trial, sigma, damage, yielded)

    def average_stress(self, stress: np.ndarray) -> np.ndarray:
        """Volume average of element stresses."""
        return self.volumes @ stress / self.volume

    def plastic_strain_field(self, state: MaterialState) -> np.ndarray:
        """(n_tets,) equivalent plastic strain averaged over each tet's points."""
        out = np.zeros(self.mesh.n_tets)
        if len(self.plastic_elements):
            out[self.plastic_elements] = state.alpha.sum(axis=2).mean(axis=1)
        return out


def assemble(
    mesh: Mesh,
    regions: RegionSpec,
    state: Optional[MaterialState],
    u: np.ndarray,
    interface: Optional[CohesiveParams] = None,
) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """
    One-off assembly of (K, F_int).

    Builds the element data on every call; solvers keep an Assembler.
    """
    assembler = Assembler(mesh, regions, interface)
    result = assembler.assemble(u, state or assembler.initial_state())
    return result.K, result.F_int
