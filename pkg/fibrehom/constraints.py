"""
Fibrehom Boundary Constraints

Dof numbering and the constraint rows C u = D ε̄ for the three RVE boundary
conditions:

- LINEAR_DISPLACEMENT: u = X(y) ε̄ at every boundary node, imposed in the
  weak form ∫ Nᵀ(u − X ε̄) dΓ = 0 (boundary mass matrix times nodal values)
- PERIODIC: u_k − u_root = X(y_k − y_root) ε̄ along a spanning tree of each
  periodic node group, plus one pinned node
- UNIFORM_TRACTION: ∫ sym(u ⊗ n) dΓ = V ε̄ (six rows) plus rigid-body
  translation and rotation rows

The homogenised stress is Dᵀλ / V in every case.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .exceptions import ConstraintRankError, PeriodicMatchError
from .materials.cohesive import SHAPE_AT_GAUSS
from .mesh import Mesh, boundary_faces
from .tensors import coordinate_matrices
from .utils import DisjointSet

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


class BCKind(str, Enum):
    """RVE boundary-condition kind."""
    LINEAR_DISPLACEMENT = "linear_displacement"
    PERIODIC = "periodic"
    UNIFORM_TRACTION = "uniform_traction"

    @classmethod
    def parse(cls, value: str) -> "BCKind":
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"linear": cls.LINEAR_DISPLACEMENT, "traction": cls.UNIFORM_TRACTION, "minimal": cls.UNIFORM_TRACTION}
        if key in aliases:
            return aliases[key]
        return cls(key)


class DofMap:
    """
    Compact displacement numbering.

    Nodes tied together (perfectly bonded interfaces) share dofs; nodes no
    tetrahedron uses get none.

    Attributes:
        representative: (n_nodes,) node whose dofs each node uses
        slot: (n_nodes,) compact node slot, -1 for unused nodes
        n_slots: Number of distinct displacement nodes
    """

    def __init__(self, mesh: Mesh, tied: Optional[np.ndarray] = None):
        forest = DisjointSet(mesh.n_nodes)
        if tied is not None:
            for a, b in np.asarray(tied, dtype=np.int64).reshape(-1, 2):
                forest.union(int(a), int(b))
        self.representative = forest.roots()
        used = np.zeros(mesh.n_nodes, dtype=bool)
        used[self.representative[np.unique(mesh.tets)]] = True
        self.slot = np.full(mesh.n_nodes, -1, dtype=np.int64)
        reps = np.nonzero(used)[0]
        self.slot[reps] = np.arange(len(reps))
        self.slot = self.slot[self.representative]
        self.n_slots = len(reps)
        self.slot_nodes = reps

    @classmethod
    def for_mesh(cls, mesh: Mesh, tie_cohesive: bool = False) -> "DofMap":
        """Dof map, optionally tying every cohesive node pair."""
        tied = None
        if tie_cohesive and mesh.n_cohesive:
            tied = np.column_stack((mesh.cohesive[:, :3].ravel(), mesh.cohesive[:, 3:].ravel()))
        return cls(mesh, tied)

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_slots

    def node_dofs(self, nodes: np.ndarray) -> np.ndarray:
        """(..., 3) dof indices of the given nodes."""
        s = self.slot[np.asarray(nodes, dtype=np.int64)]
        return 3 * s[..., None] + np.arange(3)

    def compress(self, u_nodes: np.ndarray) -> np.ndarray:
        """Dof vector from (n_nodes, 3) nodal values of the representatives."""
        return np.asarray(u_nodes, dtype=float).reshape(-1, 3)[self.slot_nodes].reshape(-1)

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Nodal (n_nodes, 3) displacements; unused nodes get zero."""
        out = np.zeros((len(self.slot), 3))
        used = self.slot >= 0
        out[used] = np.asarray(u).reshape(-1, 3)[self.slot[used]]
        return out


@dataclass
class ConstraintSystem:
    """
    Constraint rows C u = D ε̄ for one boundary-condition kind on one mesh.

    Attributes:
        kind: Boundary-condition kind
        C: (n_lambda, n_dofs) sparse constraint matrix
        D: (n_lambda, 6) macro-strain coupling
        volume: RVE volume
        dofmap: Dof numbering C refers to
        n_pinned: Trailing rows that only remove rigid-body motion
    """
    kind: BCKind
    C: sparse.csr_matrix
    D: np.ndarray
    volume: float
    dofmap: DofMap
    n_pinned: int = 0

    @property
    def n_lambda(self) -> int:
        return self.C.shape[0]

    def residual(self, u: np.ndarray, eps_bar: np.ndarray) -> np.ndarray:
        return self.D @ eps_bar - self.C @ u

    def __repr__(self) -> str:
        return (
            f"ConstraintSystem({self.kind.value}, lambda={self.n_lambda}, "
            f"dofs={self.C.shape[1]}, pinned={self.n_pinned})"
        )


def _boundary_slots(mesh: Mesh, dofmap: DofMap):
    faces = boundary_faces(mesh)
    slots = dofmap.slot[faces.tris]
    return faces, slots


def _linear_displacement(mesh: Mesh, dofmap: DofMap):
    faces, slots = _boundary_slots(mesh, dofmap)
    bnd, local = np.unique(slots, return_inverse=True)
    local = local.reshape(slots.shape)
    # consistent boundary mass ∫ N_a N_b dΓ from the 3-point rule
    mass_local = np.einsum("g,ga,gb->ab", np.full(3, 1.0 / 3.0), SHAPE_AT_GAUSS, SHAPE_AT_GAUSS)
    data = faces.areas[:, None, None] * mass_local[None]
    rows = np.repeat(local, 3, axis=1).reshape(-1)
    cols = np.tile(local, (1, 3)).reshape(-1)
    mass = sparse.coo_matrix((data.reshape(-1), (rows, cols)), shape=(len(bnd), len(bnd))).tocsr()

    c = sparse.kron(mass, sparse.identity(3, format="csr"), format="csr")
    select = sparse.coo_matrix(
        (np.ones(3 * len(bnd)), (np.arange(3 * len(bnd)), (3 * bnd[:, None] + np.arange(3)).ravel())),
        shape=(3 * len(bnd), dofmap.n_dofs),
    ).tocsr()
    x = coordinate_matrices(mesh.nodes[dofmap.slot_nodes[bnd]]).reshape(-1, 6)
    return (c @ select).tocsr(), c @ x, 0


def _periodic(mesh: Mesh, dofmap: DofMap):
    if mesh.periodic_pairs is None or len(mesh.periodic_pairs) == 0:
        raise PeriodicMatchError([], "mesh has no periodic pairs")
    pairs = mesh.periodic_pairs
    forest = DisjointSet(dofmap.n_slots)
    edges: List[tuple] = []
    for master, slave, _ in pairs:
        a, b = int(dofmap.slot[master]), int(dofmap.slot[slave])
        if a < 0 or b < 0:
            raise PeriodicMatchError([int(master), int(slave)], "periodic node is not used by any element")
        if forest.union(a, b):
            edges.append((a, b))
    roots = np.array([forest.find(s) for s in range(dofmap.n_slots)])
    members = np.nonzero(roots != np.arange(dofmap.n_slots))[0]

    positions = mesh.nodes[dofmap.slot_nodes]
    n_rows = 3 * len(members) + 3
    rows = np.arange(3 * len(members))
    member_dofs = (3 * members[:, None] + np.arange(3)).ravel()
    root_dofs = (3 * roots[members][:, None] + np.arange(3)).ravel()
    pin = int(roots.min()) if len(members) else 0
    pin_rows = 3 * len(members) + np.arange(3)
    c = sparse.coo_matrix(
        (
            np.concatenate((np.ones(len(rows)), -np.ones(len(rows)), np.ones(3))),
            (
                np.concatenate((rows, rows, pin_rows)),
                np.concatenate((member_dofs, root_dofs, 3 * pin + np.arange(3))),
            ),
        ),
        shape=(n_rows, dofmap.n_dofs),
    ).tocsr()
    d = np.zeros((n_rows, 6))
    if len(members):
        d[: 3 * len(members)] = coordinate_matrices(
            positions[members] - positions[roots[members]]
        ).reshape(-1, 6)
    logger.info("Periodic constraints: %d groups, %d tree edges", len(np.unique(roots)), len(edges))
    return c, d, 3


def _uniform_traction(mesh: Mesh, dofmap: DofMap):
    faces, slots = _boundary_slots(mesh, dofmap)
    n = faces.normals
    # rows of sym(u ⊗ n) in engineering-strain order
    pick = np.zeros((len(n), 6, 3))
    pick[:, 0, 0] = n[:, 0]
    pick[:, 1, 1] = n[:, 1]
    pick[:, 2, 2] = n[:, 2]
    pick[:, 3, 0], pick[:, 3, 1] = n[:, 1], n[:, 0]
    pick[:, 4, 1], pick[:, 4, 2] = n[:, 2], n[:, 1]
    pick[:, 5, 0], pick[:, 5, 2] = n[:, 2], n[:, 0]
    weight = faces.areas / 3.0  # ∫ N_a dΓ for each vertex
    rows = np.broadcast_to(np.arange(6)[None, None, :, None], (len(n), 3, 6, 3)).reshape(-1)
    cols = (3 * slots[:, :, None, None] + np.arange(3)[None, None, None, :])
    cols = np.broadcast_to(cols, (len(n), 3, 6, 3)).reshape(-1)
    data = (weight[:, None, None, None] * np.broadcast_to(pick[:, None], (len(n), 3, 6, 3))).reshape(-1)
    strain_rows = sparse.coo_matrix((data, (rows, cols)), shape=(6, dofmap.n_dofs)).tocsr()

    bnd = np.unique(slots)
    y = mesh.nodes[dofmap.slot_nodes[bnd]]
    r = y - y.mean(axis=0)
    pin_data, pin_rows, pin_cols = [], [], []
    for comp in range(3):
        pin_rows.append(np.full(len(bnd), comp))
        pin_cols.append(3 * bnd + comp)
        pin_data.append(np.ones(len(bnd)))
    # (r × u)_i = ε_ijk r_j u_k
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        pin_rows += [np.full(len(bnd), 3 + i), np.full(len(bnd), 3 + i)]
        pin_cols += [3 * bnd + k, 3 * bnd + j]
        pin_data += [r[:, j], -r[:, k]]
    rigid = sparse.coo_matrix(
        (np.concatenate(pin_data), (np.concatenate(pin_rows), np.concatenate(pin_cols))),
        shape=(6, dofmap.n_dofs),
    ).tocsr()
    x_full = np.zeros((dofmap.n_dofs, 6))
    x_full[(3 * bnd[:, None] + np.arange(3)).ravel()] = coordinate_matrices(y).reshape(-1, 6)
    volume = mesh.volume
    c = sparse.vstack((strain_rows, rigid), format="csr")
    d = np.vstack((volume * np.eye(6), rigid @ x_full))
    return c, d, 6


def _check_rank(c: sparse.csr_matrix, kind: BCKind) -> None:
    gram = (c @ c.T).tocsc()
    try:
        lu = splu(gram)
    except RuntimeError as exc:
        raise ConstraintRankError(kind.value, str(exc))
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() <= RANK_TOL * pivots.max():
        raise ConstraintRankError(kind.value, f"pivot ratio {pivots.min() / pivots.max():.3e}")


def build_constraints(mesh: Mesh, kind: BCKind, dofmap: Optional[DofMap] = None) -> ConstraintSystem:
    """
    Constraint matrices for one boundary-condition kind.

    Args:
        mesh: Validated mesh; PERIODIC needs periodic_pairs
        kind: Boundary-condition kind
        dofmap: Dof numbering (plain numbering when None)

    Returns:
        ConstraintSystem with C, D constant for the whole analysis

    Raises:
        PeriodicMatchError: PERIODIC without pairs
        ConstraintRankError: If C has dependent rows
    """
    kind = BCKind.parse(kind) if not isinstance(kind, BCKind) else kind
    dofmap = dofmap or DofMap(mesh)
    if kind is BCKind.LINEAR_DISPLACEMENT:
        c, d, pinned = _linear_displacement(mesh, dofmap)
    elif kind is BCKind.PERIODIC:
        c, d, pinned = _periodic(mesh, dofmap)
    else:
        c, d, pinned = _uniform_traction(mesh, dofmap)
    c.eliminate_zeros()
    _check_rank(c, kind)
    system = ConstraintSystem(kind, c, np.asarray(d), mesh.volume, dofmap, pinned)
    logger.info("Built %r", system)
    return system


def boundary_work(system: ConstraintSystem, u: np.ndarray, lam: np.ndarray) -> float:
    """λᵀ C u, the work of the boundary reactions on u."""
    return float(lam @ (system.C @ u))
