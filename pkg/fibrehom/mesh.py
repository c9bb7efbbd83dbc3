"""
Fibrehom Mesh Model

Neutral mesh data model shared by the generator, the ingestion path and the
solver: nodes, region-tagged linear tetrahedra, 6-node cohesive triangles,
named boundary face sets, periodic node pairs and optional per-element
direction vectors.

File format (UTF-8 text, '#' starts a comment):

    NODES <n>            # id x y z
    TETS <n>             # id n1 n2 n3 n4 region
    COHESIVE <n>         # id b1 b2 b3 t1 t2 t3
    FACESET <name> <n>   # n1 n2 n3 per line
    PERIODIC <n>         # master slave axis
    DIRECTIONS <n>       # elem dx dy dz

File ids are arbitrary integers mapped to 0-based indices by order of
appearance. Units are mm throughout.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .config import MIN_DIHEDRAL_WARNING_DEG
from .exceptions import MeshFormatError, MeshValidationError, PeriodicMatchError

logger = logging.getLogger(__name__)

AXIS_NAMES = ("x", "y", "z")

# face k is opposite vertex k
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])

COINCIDENCE_TOL = 1e-9
PERIODIC_TOL = 1e-8


@dataclass(frozen=True)
class Mesh:
    """
    Immutable RVE mesh.

    Attributes:
        nodes: (n, 3) coordinates
        tets: (m, 4) node indices, positively oriented
        tet_regions: (m,) integer region ids
        cohesive: (k, 6) bottom triangle then top triangle, matched order
        face_sets: Named (f, 3) boundary triangles
        periodic_pairs: (p, 3) rows of (master, slave, axis) or None
        directions: (m, 3) unit vectors, NaN rows where unset, or None
    """
    nodes: np.ndarray
    tets: np.ndarray
    tet_regions: np.ndarray
    cohesive: np.ndarray = field(default_factory=lambda: np.zeros((0, 6), dtype=int))
    face_sets: Dict[str, np.ndarray] = field(default_factory=dict)
    periodic_pairs: Optional[np.ndarray] = None
    directions: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "tets", np.asarray(self.tets, dtype=np.int64).reshape(-1, 4))
        object.__setattr__(
            self, "tet_regions", np.asarray(self.tet_regions, dtype=np.int64).reshape(-1)
        )
        object.__setattr__(
            self, "cohesive", np.asarray(self.cohesive, dtype=np.int64).reshape(-1, 6)
        )
        object.__setattr__(
            self,
            "face_sets",
            {k: np.asarray(v, dtype=np.int64).reshape(-1, 3) for k, v in self.face_sets.items()},
        )
        if self.periodic_pairs is not None:
            object.__setattr__(
                self, "periodic_pairs", np.asarray(self.periodic_pairs, dtype=np.int64).reshape(-1, 3)
            )
        if self.directions is not None:
            object.__setattr__(
                self, "directions", np.asarray(self.directions, dtype=float).reshape(-1, 3)
            )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_cohesive(self) -> int:
        return len(self.cohesive)

    @property
    def regions(self) -> List[int]:
        return sorted(int(r) for r in np.unique(self.tet_regions))

    @property
    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounds (lo, hi) of the node cloud."""
        return self.nodes.min(axis=0), self.nodes.max(axis=0)

    @property
    def diagonal(self) -> float:
        lo, hi = self.box
        return float(np.linalg.norm(hi - lo))

    def tet_volumes(self) -> np.ndarray:
        return tet_volumes(self.nodes, self.tets)

    @property
    def volume(self) -> float:
        return float(self.tet_volumes().sum())

    def summary(self) -> Dict[str, int]:
        return {
            "nodes": self.n_nodes,
            "tets": self.n_tets,
            "cohesive": self.n_cohesive,
            "face_sets": len(self.face_sets),
            "periodic_pairs": 0 if self.periodic_pairs is None else len(self.periodic_pairs),
            "regions": len(self.regions),
        }

    def __repr__(self) -> str:
        return (
            f"Mesh(nodes={self.n_nodes}, tets={self.n_tets}, "
            f"cohesive={self.n_cohesive}, regions={self.regions})"
        )


def tet_volumes(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Signed tetrahedron volumes; positive for the expected orientation."""
    x = nodes[tets]
    a = x[:, 1] - x[:, 0]
    b = x[:, 2] - x[:, 0]
    c = x[:, 3] - x[:, 0]
    return np.einsum("ij,ij->i", np.cross(a, b), c) / 6.0


_REFERENCE_GRADIENTS = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def tet_shape_gradients(nodes: np.ndarray, tets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Constant shape-function gradients of linear tetrahedra.

    Returns:
        (grads of shape (m, 4, 3), volumes of shape (m,))
    """
    x = nodes[tets]
    jac = np.stack((x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]), axis=2)
    grads = np.einsum("ak,mkj->maj", _REFERENCE_GRADIENTS, np.linalg.inv(jac))
    return grads, np.linalg.det(jac) / 6.0


def validate_mesh(mesh: Mesh, lines: Optional[Dict[str, np.ndarray]] = None) -> None:
    """
    Enforce the structural invariants of a mesh.

    Args:
        mesh: Mesh to check
        lines: Optional per-section source line numbers for error reports

    Raises:
        MeshValidationError: On the first violated invariant
    """
    lines = lines or {}

    def where(section: str, index: int) -> Optional[int]:
        rows = lines.get(section)
        return int(rows[index]) if rows is not None and index < len(rows) else None

    n = mesh.n_nodes
    if n == 0 or mesh.n_tets == 0:
        raise MeshValidationError("mesh needs at least one node and one tetrahedron")
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshValidationError("non-finite node coordinate")
    if len(mesh.tet_regions) != mesh.n_tets:
        raise MeshValidationError("region tag count differs from tetrahedron count")

    for section, ids in (("tets", mesh.tets), ("cohesive", mesh.cohesive)):
        bad = np.nonzero((ids < 0) | (ids >= n))[0]
        if len(bad):
            raise MeshValidationError(f"{section} entry references a missing node", where(section, bad[0]))
    for name, tris in mesh.face_sets.items():
        bad = np.nonzero((tris < 0) | (tris >= n))[0]
        if len(bad):
            raise MeshValidationError(f"face set {name!r} references a missing node")

    vols = mesh.tet_volumes()
    inverted = np.nonzero(vols <= 0.0)[0]
    if len(inverted):
        raise MeshValidationError(
            f"tetrahedron {inverted[0]} is inverted or flat (volume {vols[inverted[0]]:.3e})",
            where("tets", inverted[0]),
        )

    scale = mesh.diagonal
    if mesh.n_cohesive:
        gap = np.linalg.norm(
            mesh.nodes[mesh.cohesive[:, :3]] - mesh.nodes[mesh.cohesive[:, 3:]], axis=2
        ).max(axis=1)
        apart = np.nonzero(gap >= COINCIDENCE_TOL * scale)[0]
        if len(apart):
            raise MeshValidationError(
                f"cohesive element {apart[0]} faces are not coincident (gap {gap[apart[0]]:.3e})",
                where("cohesive", apart[0]),
            )

    if mesh.periodic_pairs is not None and len(mesh.periodic_pairs):
        pairs = mesh.periodic_pairs
        if np.any((pairs[:, :2] < 0) | (pairs[:, :2] >= n)) or np.any((pairs[:, 2] < 0) | (pairs[:, 2] > 2)):
            raise MeshValidationError("periodic pair references a missing node or axis")
        lo, hi = mesh.box
        delta = mesh.nodes[pairs[:, 1]] - mesh.nodes[pairs[:, 0]]
        expected = np.zeros_like(delta)
        expected[np.arange(len(pairs)), pairs[:, 2]] = (hi - lo)[pairs[:, 2]]
        off = np.abs(np.abs(delta) - expected).max(axis=1)
        bad = np.nonzero(off > PERIODIC_TOL * scale)[0]
        if len(bad):
            raise MeshValidationError(
                f"periodic pair {bad[0]} is not separated by one period", where("periodic", bad[0])
            )

    if mesh.directions is not None:
        if len(mesh.directions) != mesh.n_tets:
            raise MeshValidationError("direction count differs from tetrahedron count")
        d = mesh.directions
        set_rows = ~np.isnan(d).any(axis=1)
        norms = np.linalg.norm(d[set_rows], axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise MeshValidationError("direction vectors must be unit length")


# Parsing and serialisation

_SECTIONS = ("NODES", "TETS", "COHESIVE", "FACESET", "PERIODIC", "DIRECTIONS")
_ROW_WIDTH = {"NODES": 4, "TETS": 6, "COHESIVE": 7, "FACESET": 3, "PERIODIC": 3, "DIRECTIONS": 4}


def _tokenize(text: str) -> List[Tuple[int, List[str]]]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if body:
            rows.append((lineno, body))
    return rows


def _parse_axis(token: str, lineno: int) -> int:
    lowered = token.lower()
    if lowered in AXIS_NAMES:
        return AXIS_NAMES.index(lowered)
    try:
        axis = int(token)
    except ValueError:
        raise MeshFormatError(lineno, f"bad axis {token!r}")
    if axis not in (0, 1, 2):
        raise MeshFormatError(lineno, f"bad axis {token!r}")
    return axis


def parse_mesh(text: str) -> Mesh:
    """
    Parse the sectioned text format into a validated Mesh.

    Args:
        text: File contents

    Returns:
        Mesh with file ordering preserved

    Raises:
        MeshFormatError: Malformed section, bad number or dangling id
        MeshValidationError: Inverted tet, non-coincident cohesive pair, ...
    """
    rows = _tokenize(text)
    raw: Dict[str, List[Tuple[int, List[str]]]] = {}
    face_raw: Dict[str, List[Tuple[int, List[str]]]] = {}
    i = 0
    while i < len(rows):
        lineno, tokens = rows[i]
        keyword = tokens[0].upper()
        if keyword not in _SECTIONS:
            raise MeshFormatError(lineno, f"unknown section {tokens[0]!r}")
        expected_header = 3 if keyword == "FACESET" else 2
        if len(tokens) != expected_header:
            raise MeshFormatError(lineno, f"malformed {keyword} header")
        try:
            count = int(tokens[-1])
        except ValueError:
            raise MeshFormatError(lineno, f"bad count {tokens[-1]!r}")
        if count < 0:
            raise MeshFormatError(lineno, "negative count")
        body = rows[i + 1 : i + 1 + count]
        if len(body) < count or any(t[0].upper() in _SECTIONS for _, t in body):
            raise MeshFormatError(lineno, f"{keyword} declares {count} rows but fewer follow")
        for row_line, row in body:
            if len(row) != _ROW_WIDTH[keyword]:
                raise MeshFormatError(row_line, f"{keyword} row needs {_ROW_WIDTH[keyword]} fields")
        if keyword == "FACESET":
            if tokens[1] in face_raw:
                raise MeshFormatError(lineno, f"duplicate face set {tokens[1]!r}")
            face_raw[tokens[1]] = body
        else:
            if keyword in raw:
                raise MeshFormatError(lineno, f"duplicate {keyword} section")
            raw[keyword] = body
        i += 1 + count

    if "NODES" not in raw or "TETS" not in raw:
        raise MeshFormatError(rows[-1][0] if rows else 0, "NODES and TETS sections are required")

    def ints(line: int, tokens: Sequence[str]) -> List[int]:
        try:
            return [int(t) for t in tokens]
        except ValueError:
            raise MeshFormatError(line, "expected integers")

    def floats(line: int, tokens: Sequence[str]) -> List[float]:
        try:
            return [float(t) for t in tokens]
        except ValueError:
            raise MeshFormatError(line, "expected numbers")

    def index_map(section: str) -> Dict[int, int]:
        mapping: Dict[int, int] = {}
        for k, (line, row) in enumerate(raw.get(section, [])):
            file_id = ints(line, row[:1])[0]
            if file_id in mapping:
                raise MeshFormatError(line, f"duplicate {section} id {file_id}")
            mapping[file_id] = k
        return mapping

    node_ids = index_map("NODES")
    tet_ids = index_map("TETS")
    index_map("COHESIVE")

    def resolve(line: int, ids: Sequence[int], mapping: Dict[int, int], what: str) -> List[int]:
        try:
            return [mapping[v] for v in ids]
        except KeyError as exc:
            raise MeshFormatError(line, f"dangling {what} id {exc.args[0]}")

    nodes = np.array([floats(line, row[1:]) for line, row in raw["NODES"]]).reshape(-1, 3)
    tets, regions = [], []
    for line, row in raw["TETS"]:
        vals = ints(line, row)
        tets.append(resolve(line, vals[1:5], node_ids, "node"))
        regions.append(vals[5])
    cohesive = [
        resolve(line, ints(line, row)[1:], node_ids, "node") for line, row in raw.get("COHESIVE", [])
    ]
    face_sets = {
        name: np.array([resolve(line, ints(line, row), node_ids, "node") for line, row in body], dtype=np.int64).reshape(-1, 3)
        for name, body in face_raw.items()
    }
    periodic = None
    if "PERIODIC" in raw:
        periodic = np.array(
            [
                resolve(line, ints(line, row[:2]), node_ids, "node") + [_parse_axis(row[2], line)]
                for line, row in raw["PERIODIC"]
            ],
            dtype=np.int64,
        ).reshape(-1, 3)
    directions = None
    if "DIRECTIONS" in raw:
        directions = np.full((len(tets), 3), np.nan)
        for line, row in raw["DIRECTIONS"]:
            elem = resolve(line, ints(line, row[:1]), tet_ids, "tetrahedron")[0]
            vec = np.array(floats(line, row[1:]))
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                raise MeshFormatError(line, "zero direction vector")
            directions[elem] = vec / norm

    mesh = Mesh(
        nodes=nodes,
        tets=np.array(tets, dtype=np.int64).reshape(-1, 4),
        tet_regions=np.array(regions, dtype=np.int64),
        cohesive=np.array(cohesive, dtype=np.int64).reshape(-1, 6),
        face_sets=face_sets,
        periodic_pairs=periodic,
        directions=directions,
    )
    lines = {
        "tets": np.array([line for line, _ in raw["TETS"]]),
        "cohesive": np.array([line for line, _ in raw.get("COHESIVE", [])]),
        "periodic": np.array([line for line, _ in raw.get("PERIODIC", [])]),
    }
    validate_mesh(mesh, lines)
    logger.info("Parsed mesh: %s", mesh.summary())
    return mesh


def serialize_mesh(mesh: Mesh) -> str:
    """
    Write a mesh in the sectioned text format.

    Ids are written 1-based in storage order and floats use repr, so
    parse_mesh(serialize_mesh(m)) reproduces m exactly.
    """
    out = [
        f"# fibrehom mesh: {mesh.n_nodes} nodes, {mesh.n_tets} tets, "
        f"{mesh.n_cohesive} cohesive",
        f"NODES {mesh.n_nodes}",
    ]
    out += [
        f"{i + 1} {float(x)!r} {float(y)!r} {float(z)!r}" for i, (x, y, z) in enumerate(mesh.nodes)
    ]
    out.append(f"TETS {mesh.n_tets}")
    out += [
        f"{i + 1} {t[0] + 1} {t[1] + 1} {t[2] + 1} {t[3] + 1} {r}"
        for i, (t, r) in enumerate(zip(mesh.tets, mesh.tet_regions))
    ]
    if mesh.n_cohesive:
        out.append(f"COHESIVE {mesh.n_cohesive}")
        out += [f"{i + 1} " + " ".join(str(v + 1) for v in c) for i, c in enumerate(mesh.cohesive)]
    for name, tris in mesh.face_sets.items():
        out.append(f"FACESET {name} {len(tris)}")
        out += [" ".join(str(v + 1) for v in tri) for tri in tris]
    if mesh.periodic_pairs is not None:
        out.append(f"PERIODIC {len(mesh.periodic_pairs)}")
        out += [f"{m + 1} {s + 1} {AXIS_NAMES[a]}" for m, s, a in mesh.periodic_pairs]
    if mesh.directions is not None:
        rows = [
            (i, d) for i, d in enumerate(mesh.directions) if not np.isnan(d).any()
        ]
        out.append(f"DIRECTIONS {len(rows)}")
        out += [f"{i + 1} {float(d[0])!r} {float(d[1])!r} {float(d[2])!r}" for i, d in rows]
    return "\n".join(out) + "\n"


def read_mesh(path: Path) -> Mesh:
    """Parse a mesh file from disk."""
    return parse_mesh(Path(path).read_text(encoding="utf-8"))


def write_mesh(mesh: Mesh, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_mesh(mesh), encoding="utf-8")
    return path


# Boundary extraction

@dataclass(frozen=True)
class BoundaryFaces:
    """
    Outward-oriented boundary triangles.

    Attributes:
        tris: (f, 3) node indices, counter-clockwise seen from outside
        normals: (f, 3) unit outward normals
        areas: (f,) triangle areas
        owners: (f,) index of the tetrahedron each face belongs to
    """
    tris: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    owners: np.ndarray

    def __len__(self) -> int:
        return len(self.tris)

    @property
    def nodes(self) -> np.ndarray:
        """Sorted unique node indices on the boundary."""
        return np.unique(self.tris)


def _face_keys(tris: np.ndarray) -> np.ndarray:
    return np.sort(tris, axis=1)


def boundary_faces(mesh: Mesh) -> BoundaryFaces:
    """
    Faces owned by exactly one tetrahedron, excluding cohesive surfaces.

    Raises:
        MeshValidationError: If a face is shared by more than two tetrahedra
    """
    faces = mesh.tets[:, TET_FACES].reshape(-1, 3)
    owners = np.repeat(np.arange(mesh.n_tets), 4)
    keys = _face_keys(faces)
    _, first, inverse, counts = np.unique(
        keys, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise MeshValidationError("non-manifold boundary: a face is shared by more than two tetrahedra")
    single = counts[inverse] == 1

    if mesh.n_cohesive:
        interface = {
            tuple(k) for k in _face_keys(np.vstack((mesh.cohesive[:, :3], mesh.cohesive[:, 3:])))
        }
        single &= np.array([tuple(k) not in interface for k in keys]) if single.any() else single

    tris = faces[single].copy()
    owner = owners[single]
    x = mesh.nodes[tris]
    normal = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    centroid_tet = mesh.nodes[mesh.tets[owner]].mean(axis=1)
    inward = np.einsum("ij,ij->i", normal, x.mean(axis=1) - centroid_tet) < 0.0
    tris[inward] = tris[inward][:, [0, 2, 1]]
    normal[inward] *= -1.0
    length = np.linalg.norm(normal, axis=1)
    return BoundaryFaces(
        tris=tris,
        normals=normal / length[:, None],
        areas=0.5 * length,
        owners=owner,
    )


def box_face_sets(mesh: Mesh, tol: float = PERIODIC_TOL) -> Dict[str, np.ndarray]:
    """Boundary triangles grouped by box side: xmin, xmax, ..., zmax."""
    faces = boundary_faces(mesh)
    lo, hi = mesh.box
    atol = tol * mesh.diagonal
    x = mesh.nodes[faces.tris]
    out: Dict[str, np.ndarray] = {}
    for axis, name in enumerate(AXIS_NAMES):
        for suffix, value in (("min", lo[axis]), ("max", hi[axis])):
            on = np.all(np.abs(x[:, :, axis] - value) <= atol, axis=1)
            out[f"{name}{suffix}"] = faces.tris[on]
    return out


def with_box_face_sets(mesh: Mesh) -> Mesh:
    return replace(mesh, face_sets={**mesh.face_sets, **box_face_sets(mesh)})


# Periodic pairing

def node_region_signatures(mesh: Mesh) -> List[FrozenSet[int]]:
    """Set of region ids of the tetrahedra touching each node."""
    sig: List[set] = [set() for _ in range(mesh.n_nodes)]
    for tet, region in zip(mesh.tets, mesh.tet_regions):
        for v in tet:
            sig[v].add(int(region))
    return [frozenset(s) for s in sig]


def detect_periodic_pairs(
    mesh: Mesh,
    box: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
    tol: float = PERIODIC_TOL,
) -> np.ndarray:
    """
    Match nodes on opposite faces of the RVE box.

    Coincident nodes created by cohesive splitting are told apart by the
    regions of the tetrahedra that use them.

    Args:
        mesh: Mesh with conforming opposite faces
        box: (lo, hi) RVE bounds; the node bounding box when None
        tol: Matching tolerance relative to the box diagonal

    Returns:
        (p, 3) array of (master on lower face, slave on upper face, axis)

    Raises:
        PeriodicMatchError: Listing the nodes that found no partner
    """
    lo, hi = (np.asarray(b, dtype=float) for b in (box or mesh.box))
    atol = tol * float(np.linalg.norm(hi - lo))
    signatures = node_region_signatures(mesh)
    used = np.zeros(mesh.n_nodes, dtype=bool)
    used[np.unique(mesh.tets)] = True

    pairs: List[Tuple[int, int, int]] = []
    unmatched: List[int] = []
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        lower = np.nonzero(used & (np.abs(mesh.nodes[:, axis] - lo[axis]) <= atol))[0]
        upper = np.nonzero(used & (np.abs(mesh.nodes[:, axis] - hi[axis]) <= atol))[0]
        if len(upper) == 0 and len(lower) == 0:
            continue
        tree = cKDTree(mesh.nodes[upper][:, others])
        taken = np.zeros(len(upper), dtype=bool)
        for node in lower:
            candidates = tree.query_ball_point(mesh.nodes[node, others], r=atol)
            if len(candidates) > 1:
                candidates = [c for c in candidates if signatures[upper[c]] == signatures[node]]
            candidates = [c for c in candidates if not taken[c]]
            if len(candidates) != 1:
                unmatched.append(int(node))
                continue
            taken[candidates[0]] = True
            pairs.append((int(node), int(upper[candidates[0]]), axis))
        unmatched.extend(int(n) for n in upper[~taken])

    if unmatched:
        raise PeriodicMatchError(sorted(set(unmatched)), "opposite faces do not conform")
    logger.info("Matched %d periodic node pairs", len(pairs))
    return np.array(pairs, dtype=np.int64).reshape(-1, 3)


def with_periodic_pairs(mesh: Mesh, pairs: Optional[np.ndarray] = None) -> Mesh:
    """Return a copy carrying periodic pairs, detecting them when not given."""
    if pairs is None:
        pairs = detect_periodic_pairs(mesh)
    return replace(mesh, periodic_pairs=pairs)


# Quality

@dataclass(frozen=True)
class MeshQuality:
    """Minimum dihedral angle per tetrahedron (degrees) and the worst offenders."""
    min_dihedral: np.ndarray
    threshold: float

    @property
    def worst(self) -> float:
        return float(self.min_dihedral.min()) if len(self.min_dihedral) else 180.0

    @property
    def poor(self) -> np.ndarray:
        return np.nonzero(self.min_dihedral < self.threshold)[0]


def mesh_quality(mesh: Mesh, threshold: float = MIN_DIHEDRAL_WARNING_DEG) -> MeshQuality:
    """Dihedral-angle quality report; warns when any tet falls below threshold."""
    x = mesh.nodes[mesh.tets]
    normals = np.empty((mesh.n_tets, 4, 3))
    for k, face in enumerate(TET_FACES):
        n = np.cross(x[:, face[1]] - x[:, face[0]], x[:, face[2]] - x[:, face[0]])
        away = np.einsum("ij,ij->i", n, x[:, face[0]] - x[:, k])
        n *= np.sign(away)[:, None]
        normals[:, k] = n / np.linalg.norm(n, axis=1)[:, None]
    # edge (i, j) is shared by the faces opposite the other two vertices
    angles = []
    for i, j in TET_EDGES:
        k, l = [v for v in range(4) if v not in (i, j)]
        cos = -np.einsum("ij,ij->i", normals[:, k], normals[:, l])
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    quality = MeshQuality(np.min(angles, axis=0), threshold)
    if len(quality.poor):
        logger.warning(
            "%d tetrahedra have a dihedral angle below %.1f deg (worst %.2f)",
            len(quality.poor), threshold, quality.worst,
        )
    return quality
