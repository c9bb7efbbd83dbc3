"""
Fibrehom RVE Mesher

Built-in meshing for UD RVEs and test boxes:

- mesh_ud_rve: 2D Delaunay triangulation of the fibre cross-section with
  matching boundary traces on opposite sides, extruded into prisms and
  split into three tetrahedra each by the vertex-index rule
- structured_box_mesh: six-tetrahedra-per-cell brick mesh
- insert_cohesive: node splitting along a region interface with 6-node
  cohesive elements
- stack_laminae: two UD blocks merged into a cross-ply RVE
"""

import logging
import math
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .exceptions import MeshingError, MeshValidationError
from .layout import FibreLayout, _periodic_delta
from .mesh import TET_FACES, Mesh, tet_volumes, validate_mesh, with_box_face_sets

logger = logging.getLogger(__name__)

MATRIX_REGION = 1
FIBRE_REGION = 2

MIN_GAP_RATIO = 0.5        # fibre-fibre gap, in target edges
LATTICE_CIRCLE_RATIO = 0.65
LATTICE_SIDE_RATIO = 0.5
ARC_DROP_RATIO = 0.3


def boundary_divisions(length: float, h: float) -> int:
    """Number of segments of length at most h along a side."""
    return max(1, int(math.ceil(length / h - 1e-9)))


def _fix_orientation(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    vols = tet_volumes(nodes, tets)
    tets = tets.copy()
    flip = vols < 0.0
    tets[flip] = tets[flip][:, [0, 1, 3, 2]]
    return tets


# UD cross-section

def _stations(length: float, crossings: Sequence[float], h: float) -> np.ndarray:
    tol = 1e-12 * length
    marks = sorted(c for c in crossings if tol < c < length - tol)
    anchors = [0.0]
    for c in marks:
        if c - anchors[-1] > tol:
            anchors.append(c)
    if length - anchors[-1] <= tol:
        anchors.pop()
    anchors.append(length)
    pts: List[float] = []
    for a, b in zip(anchors[:-1], anchors[1:]):
        k = boundary_divisions(b - a, h)
        pts.extend(a + (b - a) * np.arange(k) / k)
    pts.append(length)
    return np.array(pts)


def _side_crossings(layout: FibreLayout, axis: int) -> List[float]:
    """Coordinates along the sides normal to `axis` where fibre outlines cross them."""
    along = 1 - axis
    size, span = layout.cell[axis], layout.cell[along]
    r = layout.radius
    out: List[float] = []
    for c in layout.centres:
        for d in (c[axis], size - c[axis]):
            if d < r:
                offset = math.sqrt(r * r - d * d)
                for v in (c[along] - offset, c[along] + offset):
                    out.append(v % span)
    return out


def _check_gaps(layout: FibreLayout, h: float) -> None:
    n = len(layout.centres)
    if n < 2:
        return
    d = _periodic_delta(
        layout.centres[:, None, :] - layout.centres[None, :, :], layout.cell, layout.wall_axes
    )
    gap = np.linalg.norm(d, axis=2) - 2.0 * layout.radius
    gap[np.arange(n), np.arange(n)] = np.inf
    i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
    if gap[i, j] < MIN_GAP_RATIO * h * (1.0 - 1e-9):
        raise MeshingError(
            f"fibre gap {gap[i, j]:.3e} mm is below {MIN_GAP_RATIO} x target edge {h:.3e} mm",
            fibres=(int(min(i, j)), int(max(i, j))),
        )


def triangulate_section(layout: FibreLayout, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Periodic-conforming triangulation of the fibre cross-section.

    Args:
        layout: Fibre layout
        h: Target edge length (mm)

    Returns:
        (points (N, 2) sorted by (y, x), triangles (T, 3) counter-clockwise,
        region tag per triangle)

    Raises:
        MeshingError: If two fibres are too close for h or Delaunay drops points
    """
    lx, ly = layout.cell
    r = layout.radius
    _check_gaps(layout, h)

    xs = _stations(lx, _side_crossings(layout, axis=1), h)
    ys = _stations(ly, _side_crossings(layout, axis=0), h)
    boundary = np.vstack((
        np.column_stack((xs, np.zeros_like(xs))),
        np.column_stack((xs, np.full_like(xs, ly))),
        np.column_stack((np.zeros_like(ys[1:-1]), ys[1:-1])),
        np.column_stack((np.full_like(ys[1:-1], lx), ys[1:-1])),
    ))

    images = layout.images()
    centres = np.array([[img.x, img.y] for img in images]).reshape(-1, 2)
    arcs: List[np.ndarray] = []
    if len(images):
        m = max(8, int(math.ceil(2.0 * math.pi * r / h)))
        theta = 2.0 * math.pi * np.arange(m) / m
        ring = r * np.column_stack((np.cos(theta), np.sin(theta)))
        margin = ARC_DROP_RATIO * h
        for c in centres:
            pts = c + ring
            inside = (
                (pts[:, 0] > margin) & (pts[:, 0] < lx - margin)
                & (pts[:, 1] > margin) & (pts[:, 1] < ly - margin)
            )
            pts = pts[inside]
            on_circle = boundary[np.abs(np.linalg.norm(boundary - c, axis=1) - r) < 1e-9 * r]
            if len(on_circle) and len(pts):
                near = np.min(np.linalg.norm(pts[:, None] - on_circle[None], axis=2), axis=1)
                pts = pts[near > margin]
            arcs.append(pts)

    step = h * math.sqrt(3.0) / 2.0
    lattice = []
    for j in range(1, int(ly / step) + 1):
        y = j * step
        x = (np.arange(int(lx / h) + 2) + 0.5 * (j % 2)) * h
        lattice.append(np.column_stack((x, np.full_like(x, y))))
    grid = np.vstack(lattice) if lattice else np.zeros((0, 2))
    side = LATTICE_SIDE_RATIO * h
    keep = (grid[:, 0] >= side) & (grid[:, 0] <= lx - side) & (grid[:, 1] >= side) & (grid[:, 1] <= ly - side)
    grid = grid[keep]
    if len(centres) and len(grid):
        tree = cKDTree(centres)
        near = tree.query_ball_point(grid, r + LATTICE_CIRCLE_RATIO * h)
        far = np.array([
            all(abs(np.linalg.norm(grid[i] - centres[k]) - r) >= LATTICE_CIRCLE_RATIO * h for k in ks)
            for i, ks in enumerate(near)
        ], dtype=bool)
        grid = grid[far]

    points = np.vstack([boundary, grid] + arcs)
    points = points[np.lexsort((points[:, 0], points[:, 1]))]
    tri = Delaunay(points)
    if len(tri.coplanar):
        raise MeshingError(f"triangulation dropped {len(tri.coplanar)} coincident points")
    simplices = tri.simplices.copy()
    p = points[simplices]
    area = 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    simplices[area < 0.0] = simplices[area < 0.0][:, [0, 2, 1]]
    simplices = simplices[np.abs(area) > 1e-12 * h * h]

    tags = np.full(len(simplices), MATRIX_REGION, dtype=np.int64)
    if len(centres):
        verts = points[simplices]
        _, nearest = cKDTree(centres).query(verts.mean(axis=1))
        dist = np.linalg.norm(verts - centres[nearest][:, None, :], axis=2)
        inside = np.all(dist <= r * (1.0 + 1e-9), axis=1)
        straddle = ~inside & np.any(dist < r * (1.0 - 1e-9), axis=1)
        centroid_in = np.linalg.norm(verts.mean(axis=1) - centres[nearest], axis=1) < r
        tags[inside | (straddle & centroid_in)] = FIBRE_REGION
        if straddle.any():
            logger.debug("%d triangles straddle a fibre outline", int(straddle.sum()))
    return points, simplices, tags


def extrude_section(
    points: np.ndarray, triangles: np.ndarray, tags: np.ndarray, depth: float, nz: int
) -> Mesh:
    """
    Extrude a triangulated section along z and split prisms into tetrahedra.

    Each quadrilateral side face is cut along the diagonal joining its
    lower-index bottom vertex to its higher-index top vertex, which keeps
    neighbouring prisms and opposite RVE faces conforming.
    """
    n2 = len(points)
    z = np.linspace(0.0, depth, nz + 1)
    nodes = np.vstack([np.column_stack((points, np.full(n2, zk))) for zk in z])
    v = np.sort(triangles, axis=1)
    tets, regions = [], []
    for k in range(nz):
        b = v + k * n2
        t = v + (k + 1) * n2
        tets.append(np.stack((b[:, 0], b[:, 1], b[:, 2], t[:, 2]), axis=1))
        tets.append(np.stack((b[:, 0], b[:, 1], t[:, 1], t[:, 2]), axis=1))
        tets.append(np.stack((b[:, 0], t[:, 0], t[:, 1], t[:, 2]), axis=1))
        regions.extend([tags, tags, tags])
    all_tets = _fix_orientation(nodes, np.vstack(tets))
    return Mesh(nodes=nodes, tets=all_tets, tet_regions=np.concatenate(regions))


def mesh_ud_rve(
    layout: FibreLayout,
    depth: float,
    nz: Optional[int] = None,
    target_edge: Optional[float] = None,
) -> Mesh:
    """
    Tetrahedral UD RVE with fibres along z.

    Args:
        layout: Fibre cross-section
        depth: RVE length along the fibres (mm)
        nz: Number of element layers; defaults to the side division count
        target_edge: Target edge length; defaults to r/3 (cell/10 without fibres)

    Returns:
        Mesh tagged MATRIX_REGION / FIBRE_REGION with box face sets

    Raises:
        MeshingError: Near-tangent fibres or triangulation failure
    """
    h = target_edge or (layout.radius / 3.0 if len(layout) else min(layout.cell) / 10.0)
    if not h > 0.0:
        raise MeshingError(f"target edge must be positive, got {h}")
    nz = nz or boundary_divisions(depth, h)
    points, triangles, tags = triangulate_section(layout, h)
    mesh = with_box_face_sets(extrude_section(points, triangles, tags, depth, nz))
    validate_mesh(mesh)
    logger.info(
        "UD mesh: %d section points, %d triangles, %d layers -> %d tets",
        len(points), len(triangles), nz, mesh.n_tets,
    )
    return mesh


# Structured boxes

def structured_box_mesh(
    divisions: Sequence[int],
    lengths: Sequence[float] = (1.0, 1.0, 1.0),
    origin: Sequence[float] = (0.0, 0.0, 0.0),
    region: int = MATRIX_REGION,
) -> Mesh:
    """
    Brick mesh with six tetrahedra per cell around each cell's main diagonal.

    Opposite box faces carry identical triangulations.
    """
    nx, ny, nz = (int(d) for d in divisions)
    if min(nx, ny, nz) < 1:
        raise MeshingError(f"divisions must be positive, got {tuple(divisions)}")
    axes = [np.linspace(o, o + length, n + 1) for o, length, n in zip(origin, lengths, (nx, ny, nz))]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack((gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")))

    def node_id(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    tets = []
    for order in permutations(range(3)):
        corner = np.zeros((3, len(ii)), dtype=np.int64)
        path = [node_id(ii, jj, kk)]
        for axis in order:
            corner[axis] += 1
            path.append(node_id(ii + corner[0], jj + corner[1], kk + corner[2]))
        tets.append(np.stack(path, axis=1))
    all_tets = _fix_orientation(nodes, np.vstack(tets))
    mesh = Mesh(nodes=nodes, tets=all_tets, tet_regions=np.full(len(all_tets), region))
    return with_box_face_sets(mesh)


# Cohesive insertion

def insert_cohesive(mesh: Mesh, interface: Tuple[int, int] = (MATRIX_REGION, FIBRE_REGION)) -> Mesh:
    """
    Split the interface between two regions and add cohesive elements.

    Nodes on faces shared by a tet of region a and a tet of region b are
    duplicated; region-b tets move to the duplicates. The bottom triangle
    of each cohesive element is the region-a face with its normal pointing
    into region b, and the top triangle repeats it on the duplicates.
    Face sets follow the side they belong to; periodic pairs are dropped
    and must be detected again.

    Raises:
        MeshValidationError: If the regions share no face
    """
    region_a, region_b = interface
    faces = mesh.tets[:, TET_FACES].reshape(-1, 3)
    owner = np.repeat(np.arange(mesh.n_tets), 4)
    keys = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    shared = counts[inverse[order]] == 2
    pair_rows = order[shared].reshape(-1, 2)
    regions = mesh.tet_regions[owner[pair_rows]]
    a_first = (regions[:, 0] == region_a) & (regions[:, 1] == region_b)
    b_first = (regions[:, 0] == region_b) & (regions[:, 1] == region_a)
    a_rows = np.concatenate((pair_rows[a_first, 0], pair_rows[b_first, 1]))
    if len(a_rows) == 0:
        raise MeshValidationError(f"regions {region_a} and {region_b} share no face")
    a_rows.sort()
    bottom = faces[a_rows]

    split = np.unique(bottom)
    duplicate = np.full(mesh.n_nodes, -1, dtype=np.int64)
    duplicate[split] = mesh.n_nodes + np.arange(len(split))

    tets = mesh.tets.copy()
    in_b = mesh.tet_regions == region_b
    b_tets = tets[in_b]
    moved = duplicate[b_tets] >= 0
    b_tets[moved] = duplicate[b_tets][moved]
    tets[in_b] = b_tets

    top = duplicate[bottom]
    cohesive = np.vstack((mesh.cohesive, np.hstack((bottom, top))))
    nodes = np.vstack((mesh.nodes, mesh.nodes[split]))

    b_face_keys = {tuple(k) for k in np.sort(mesh.tets[in_b][:, TET_FACES].reshape(-1, 3), axis=1)}
    face_sets: Dict[str, np.ndarray] = {}
    for name, tris in mesh.face_sets.items():
        remapped = tris.copy()
        for row, tri in enumerate(tris):
            if tuple(np.sort(tri)) in b_face_keys:
                remapped[row] = np.where(duplicate[tri] >= 0, duplicate[tri], tri)
        face_sets[name] = remapped

    lo, hi = mesh.box
    on_box = np.any(
        (np.abs(mesh.nodes[split] - lo) <= 1e-8 * mesh.diagonal)
        | (np.abs(mesh.nodes[split] - hi) <= 1e-8 * mesh.diagonal),
        axis=1,
    )
    if on_box.any():
        logger.info("Interface meets the RVE boundary at %d nodes; duplicated with the rest", int(on_box.sum()))

    out = Mesh(
        nodes=nodes,
        tets=tets,
        tet_regions=mesh.tet_regions,
        cohesive=cohesive,
        face_sets=face_sets,
        periodic_pairs=None,
        directions=mesh.directions,
    )
    validate_mesh(out)
    logger.info("Inserted %d cohesive elements (+%d nodes)", len(a_rows), len(split))
    return out


# Laminates

def mirror_xz(mesh: Mesh) -> Mesh:
    """Swap the x and z coordinates, turning fibres along z into fibres along x."""
    nodes = mesh.nodes[:, [2, 1, 0]]
    directions = None if mesh.directions is None else mesh.directions[:, [2, 1, 0]]
    swap = {"xmin": "zmin", "xmax": "zmax", "zmin": "xmin", "zmax": "xmax"}
    face_sets = {swap.get(name, name): tris for name, tris in mesh.face_sets.items()}
    return Mesh(
        nodes=nodes,
        tets=_fix_orientation(nodes, mesh.tets),
        tet_regions=mesh.tet_regions,
        cohesive=mesh.cohesive,
        face_sets=face_sets,
        directions=directions,
    )


def stack_laminae(lower: Mesh, upper: Mesh, tol: float = 1e-8) -> Mesh:
    """
    Cross-ply RVE: upper block mirrored x<->z and stacked on lower along y.

    Coincident nodes on the shared plane are merged, which bonds the laminae
    perfectly. Both blocks need matching boundary spacing on the stacking
    faces so that their triangulations coincide.

    Raises:
        MeshingError: If the stacking faces do not coincide
    """
    if lower.n_cohesive or upper.n_cohesive:
        raise MeshingError("stack laminae before inserting cohesive elements")
    top = mirror_xz(upper)
    lo_l, hi_l = lower.box
    lo_u, hi_u = top.box
    if not np.allclose([lo_l[0], hi_l[0], lo_l[2], hi_l[2]], [lo_u[0], hi_u[0], lo_u[2], hi_u[2]], rtol=0.0, atol=tol * lower.diagonal):
        raise MeshingError("laminae have different in-plane extents")
    shift = np.array([0.0, hi_l[1] - lo_u[1], 0.0])
    top_nodes = top.nodes + shift
    atol = tol * lower.diagonal

    lower_plane = np.nonzero(np.abs(lower.nodes[:, 1] - hi_l[1]) <= atol)[0]
    upper_plane = np.nonzero(np.abs(top_nodes[:, 1] - hi_l[1]) <= atol)[0]
    if len(lower_plane) != len(upper_plane):
        raise MeshingError(
            f"stacking faces carry {len(lower_plane)} and {len(upper_plane)} nodes"
        )
    dist, match = cKDTree(lower.nodes[lower_plane]).query(top_nodes[upper_plane])
    if np.any(dist > atol) or len(np.unique(match)) != len(match):
        raise MeshingError("stacking face nodes do not coincide")

    index = np.full(top.n_nodes, -1, dtype=np.int64)
    index[upper_plane] = lower_plane[match]
    rest = np.setdiff1d(np.arange(top.n_nodes), upper_plane)
    index[rest] = lower.n_nodes + np.arange(len(rest))

    nodes = np.vstack((lower.nodes, top_nodes[rest]))
    tets = np.vstack((lower.tets, index[top.tets]))
    regions = np.concatenate((lower.tet_regions, top.tet_regions))
    directions = None
    if lower.directions is not None or top.directions is not None:
        d_low = lower.directions if lower.directions is not None else np.full((lower.n_tets, 3), np.nan)
        d_top = top.directions if top.directions is not None else np.full((top.n_tets, 3), np.nan)
        directions = np.vstack((d_low, d_top))
    merged = Mesh(nodes=nodes, tets=tets, tet_regions=regions, directions=directions)

    keys = np.sort(merged.tets[:, TET_FACES].reshape(-1, 3), axis=1)
    plane_faces = np.all(np.abs(merged.nodes[keys][:, :, 1] - hi_l[1]) <= atol, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    if np.any(counts[inverse.reshape(-1)][plane_faces] != 2):
        raise MeshingError("stacking face triangulations do not coincide")

    merged = with_box_face_sets(merged)
    validate_mesh(merged)
    logger.info("Stacked laminae: %d + %d tets, %d merged nodes", lower.n_tets, top.n_tets, len(upper_plane))
    return merged
