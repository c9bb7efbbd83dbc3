"""
Fibrehom Yarn Material

Transversely isotropic linear elasticity with the fibre/yarn axis as local
z, the isotropic fibre special case, and per-element direction fields
including the potential-flow direction solver for curved yarns.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from ..exceptions import MeshValidationError, ParameterError
from ..mesh import TET_FACES, Mesh, tet_shape_gradients
from ..tensors import Basis3, rotate_stiffness, tensor4_to_voigt, voigt_to_tensor4

logger = logging.getLogger(__name__)

FaceSource = Union[str, ArrayLike]


@dataclass(frozen=True)
class TransIsoParams:
    """
    Five-constant transversely isotropic elasticity (MPa).

    Attributes:
        Ep: Transverse Young's modulus
        nu_p: Transverse Poisson's ratio
        Ez: Axial Young's modulus
        nu_pz: Axial Poisson's ratio
        Gzp: Axial shear modulus
    """
    Ep: float
    nu_p: float
    Ez: float
    nu_pz: float
    Gzp: float

    def __post_init__(self):
        for name in ("Ep", "Ez", "Gzp"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(name, getattr(self, name), "must be positive")
        eig = np.linalg.eigvalsh(_compliance(self))
        if eig.min() <= 0.0:
            raise ParameterError(
                "TransIsoParams", self.to_dict(),
                f"stiffness is not positive definite (eigenvalue {eig.min():.6g})",
            )

    @property
    def Gp(self) -> float:
        """In-plane shear modulus Ep / (2(1 + νp))."""
        return self.Ep / (2.0 * (1.0 + self.nu_p))

    @classmethod
    def glass_yarn(cls) -> "TransIsoParams":
        """Impregnated glass yarn constants used by the textile fixtures."""
        return cls(Ep=18060.0, nu_p=0.34, Ez=48470.0, nu_pz=0.25, Gzp=5580.0)

    def to_dict(self) -> Dict[str, float]:
        return {"Ep": self.Ep, "nu_p": self.nu_p, "Ez": self.Ez, "nu_pz": self.nu_pz, "Gzp": self.Gzp}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TransIsoParams":
        try:
            return cls(**{k: float(d[k]) for k in ("Ep", "nu_p", "Ez", "nu_pz", "Gzp")})
        except KeyError as exc:
            raise ParameterError("yarn", dict(d), f"missing constant {exc.args[0]!r}")


def _compliance(p: TransIsoParams) -> np.ndarray:
    s = np.zeros((6, 6))
    s[0, 0] = s[1, 1] = 1.0 / p.Ep
    s[2, 2] = 1.0 / p.Ez
    s[0, 1] = s[1, 0] = -p.nu_p / p.Ep
    s[0, 2] = s[2, 0] = s[1, 2] = s[2, 1] = -p.nu_pz / p.Ez
    s[3, 3] = 2.0 * (1.0 + p.nu_p) / p.Ep
    s[4, 4] = s[5, 5] = 1.0 / p.Gzp
    return s


def local_stiffness(p: TransIsoParams) -> np.ndarray:
    """6×6 stiffness in the material frame (fibre axis = local z)."""
    c = np.linalg.inv(_compliance(p))
    return 0.5 * (c + c.T)


def isotropic_from_fibre(Ef: float, nu_f: float) -> TransIsoParams:
    """Isotropic fibre as the degenerate transversely isotropic case."""
    if not Ef > 0.0:
        raise ParameterError("Ef", Ef, "must be positive")
    if not 0.0 <= nu_f < 0.5:
        raise ParameterError("nu_f", nu_f, "must satisfy 0 <= nu_f < 0.5")
    return TransIsoParams(Ep=Ef, nu_p=nu_f, Ez=Ef, nu_pz=nu_f, Gzp=Ef / (2.0 * (1.0 + nu_f)))


def element_stiffness_global(p: TransIsoParams, direction: ArrayLike) -> np.ndarray:
    """Global stiffness of an element whose fibre axis is direction."""
    return rotate_stiffness(local_stiffness(p), Basis3.from_axis(direction))


def stiffness_for_directions(p: TransIsoParams, directions: np.ndarray) -> np.ndarray:
    """
    Batched element_stiffness_global.

    Args:
        p: Yarn constants
        directions: (k, 3) non-zero axis vectors

    Returns:
        (k, 6, 6) global stiffnesses
    """
    dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
    q = np.stack([Basis3.from_axis(d).matrix for d in dirs]) if len(dirs) else np.zeros((0, 3, 3))
    c4 = voigt_to_tensor4(local_stiffness(p))
    rotated = np.einsum("nia,njb,nkc,nld,abcd->nijkl", q, q, q, q, c4, optimize=True)
    out = np.stack([tensor4_to_voigt(r) for r in rotated]) if len(dirs) else np.zeros((0, 6, 6))
    return 0.5 * (out + out.transpose(0, 2, 1))


# Direction fields

@dataclass
class DirectionField:
    """
    Unit fibre/yarn axis per element.

    Attributes:
        elements: Tetrahedron indices covered by the field
        vectors: (k, 3) unit vectors aligned with elements
        potential: Nodal potential of the flow solve (NaN off-region), if any
        inlet_flux, outlet_flux: Total flux through the Dirichlet sets
        fallbacks: Elements whose gradient vanished and were averaged
    """
    elements: np.ndarray
    vectors: np.ndarray
    potential: Optional[np.ndarray] = None
    inlet_flux: float = 0.0
    outlet_flux: float = 0.0
    fallbacks: List[int] = field(default_factory=list)

    def __post_init__(self):
        norms = np.linalg.norm(self.vectors, axis=1) if len(self.vectors) else np.ones(0)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ParameterError("directions", int(np.argmax(np.abs(norms - 1.0))), "vector is not unit length")

    def to_full(self, n_tets: int) -> np.ndarray:
        """(n_tets, 3) array with NaN rows outside the field."""
        full = np.full((n_tets, 3), np.nan)
        full[self.elements] = self.vectors
        return full

    @classmethod
    def constant(cls, elements: ArrayLike, axis: ArrayLike) -> "DirectionField":
        elems = np.asarray(elements, dtype=np.int64)
        a = np.asarray(axis, dtype=float).reshape(3)
        a = a / np.linalg.norm(a)
        return cls(elems, np.tile(a, (len(elems), 1)))

    @classmethod
    def from_mesh(cls, mesh: Mesh, elements: ArrayLike) -> "DirectionField":
        """Directions read from the mesh file's DIRECTIONS section."""
        elems = np.asarray(elements, dtype=np.int64)
        if mesh.directions is None:
            raise MeshValidationError("mesh has no DIRECTIONS section")
        vecs = mesh.directions[elems]
        missing = np.nonzero(np.isnan(vecs).any(axis=1))[0]
        if len(missing):
            raise MeshValidationError(f"no direction given for element {int(elems[missing[0]])}")
        return cls(elems, vecs)


def _face_triangles(mesh: Mesh, faces: FaceSource) -> np.ndarray:
    if isinstance(faces, str):
        if faces not in mesh.face_sets:
            raise MeshValidationError(f"unknown face set {faces!r}")
        return mesh.face_sets[faces]
    return np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _face_adjacency(tets: np.ndarray) -> sparse.csr_matrix:
    """Element graph with an edge wherever two tetrahedra share a face."""
    keys = np.sort(tets[:, TET_FACES].reshape(-1, 3), axis=1)
    owner = np.repeat(np.arange(len(tets)), 4)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    shared = counts[inverse[order]] == 2
    pairs = owner[order][shared].reshape(-1, 2)
    n = len(tets)
    graph = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return (graph + graph.T).tocsr()


def potential_flow_directions(
    mesh: Mesh,
    yarn_region: int,
    inlet_faces: FaceSource,
    outlet_faces: FaceSource,
) -> DirectionField:
    """
    Yarn axis from a potential-flow solve on the yarn subdomain.

    Solves the Laplace problem with φ = 0 on the inlet, φ = 1 on the outlet
    and zero flux elsewhere, then takes the normalised element gradient.

    Args:
        mesh: Mesh containing the yarn
        yarn_region: Region id of the yarn tetrahedra
        inlet_faces: Face-set name or (f, 3) node triangles
        outlet_faces: Face-set name or (f, 3) node triangles

    Returns:
        DirectionField over the yarn elements

    Raises:
        MeshValidationError: Empty or overlapping boundary sets, or a yarn
            region that is not face-connected
    """
    elements = np.nonzero(mesh.tet_regions == yarn_region)[0]
    if len(elements) == 0:
        raise MeshValidationError(f"region {yarn_region} has no elements")
    tets = mesh.tets[elements]
    n_comp, _ = connected_components(_face_adjacency(tets), directed=False)
    if n_comp != 1:
        raise MeshValidationError(f"yarn region {yarn_region} splits into {n_comp} disconnected parts")

    inlet = np.unique(_face_triangles(mesh, inlet_faces))
    outlet = np.unique(_face_triangles(mesh, outlet_faces))
    if len(inlet) == 0 or len(outlet) == 0:
        raise MeshValidationError("inlet and outlet face sets must be non-empty")
    if np.intersect1d(inlet, outlet).size:
        raise MeshValidationError("inlet and outlet face sets share nodes")

    region_nodes, local = np.unique(tets, return_inverse=True)
    local = local.reshape(tets.shape)
    if not (np.isin(inlet, region_nodes).all() and np.isin(outlet, region_nodes).all()):
        raise MeshValidationError(f"inlet/outlet faces are not on yarn region {yarn_region}")

    grads, vols = tet_shape_gradients(mesh.nodes, tets)
    ke = vols[:, None, None] * np.einsum("maj,mbj->mab", grads, grads)
    rows = np.repeat(local, 4, axis=1).reshape(-1)
    cols = np.tile(local, (1, 4)).reshape(-1)
    n = len(region_nodes)
    k = sparse.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()

    phi = np.zeros(n)
    inlet_local = np.searchsorted(region_nodes, inlet)
    outlet_local = np.searchsorted(region_nodes, outlet)
    phi[outlet_local] = 1.0
    fixed = np.zeros(n, dtype=bool)
    fixed[inlet_local] = True
    fixed[outlet_local] = True
    free = ~fixed
    if free.any():
        rhs = -k[free][:, fixed] @ phi[fixed]
        phi[free] = spsolve(k[free][:, free].tocsc(), rhs)

    reactions = k @ phi
    inlet_flux = float(reactions[inlet_local].sum())
    outlet_flux = float(reactions[outlet_local].sum())

    gradient = np.einsum("maj,ma->mj", grads, phi[local])
    norms = np.linalg.norm(gradient, axis=1)
    weak = norms <= 1e-12 * max(float(norms.max()), 1e-300)
    vectors = np.zeros_like(gradient)
    vectors[~weak] = gradient[~weak] / norms[~weak, None]

    fallbacks: List[int] = []
    if weak.any():
        adjacency = _face_adjacency(tets)
        for e in np.nonzero(weak)[0]:
            neighbours = [j for j in adjacency[e].indices if not weak[j]]
            avg = vectors[neighbours].sum(axis=0) if neighbours else np.zeros(3)
            norm = np.linalg.norm(avg)
            if norm == 0.0:
                raise MeshValidationError(
                    f"element {int(elements[e])} has zero potential gradient and no usable neighbours"
                )
            vectors[e] = avg / norm
            fallbacks.append(int(elements[e]))
        logger.warning(
            "Potential flow in region %d: %d zero-gradient elements averaged from neighbours",
            yarn_region, len(fallbacks),
        )

    potential = np.full(mesh.n_nodes, np.nan)
    potential[region_nodes] = phi
    logger.info(
        "Flow directions for region %d: %d elements, inlet flux %.6e, outlet flux %.6e",
        yarn_region, len(elements), inlet_flux, outlet_flux,
    )
    return DirectionField(elements, vectors, potential, inlet_flux, outlet_flux, fallbacks)


def section_flux(
    mesh: Mesh,
    field_: DirectionField,
    point: Sequence[float],
    normal: Sequence[float],
) -> float:
    """
    Discrete flux of the potential through a planar cut of the yarn.

    Uses the nodal indicator of the side the normal points to as test
    function, which makes the result exactly conservative for the FE
    solution.
    """
    if field_.potential is None:
        raise ParameterError("field", "no potential", "direction field was not produced by a flow solve")
    tets = mesh.tets[field_.elements]
    side = (mesh.nodes - np.asarray(point, dtype=float)) @ np.asarray(normal, dtype=float) > 0.0
    w = side[tets].astype(float)
    cut = (w.min(axis=1) == 0.0) & (w.max(axis=1) == 1.0)
    grads, vols = tet_shape_gradients(mesh.nodes, tets[cut])
    grad_w = np.einsum("maj,ma->mj", grads, w[cut])
    grad_phi = np.einsum("maj,ma->mj", grads, field_.potential[tets[cut]])
    return float(np.sum(vols * np.einsum("mj,mj->m", grad_w, grad_phi)))
