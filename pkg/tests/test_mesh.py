"""Tests for the mesh model, file format, boundary extraction and periodic pairing."""

from dataclasses import replace

import numpy as np
import pytest

from fibrehom.exceptions import MeshFormatError, MeshValidationError, PeriodicMatchError
from fibrehom.mesh import (
    Mesh,
    boundary_faces,
    detect_periodic_pairs,
    mesh_quality,
    node_region_signatures,
    parse_mesh,
    read_mesh,
    serialize_mesh,
    validate_mesh,
    write_mesh,
)
from fibrehom.mesher import insert_cohesive, structured_box_mesh

from .conftest import split_regions

SINGLE_TET = """\
# one tetrahedron, ids need not start at 1
NODES 4
10 0 0 0
20 1 0 0
30 0 1 0
40 0 0 1
TETS 1
7 10 20 30 40 1
"""


def _brute_force_pairs(mesh, tol=1e-9):
    lo, hi = mesh.box
    signatures = node_region_signatures(mesh)
    pairs = set()
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        lower = [i for i in range(mesh.n_nodes) if abs(mesh.nodes[i, axis] - lo[axis]) < tol]
        upper = [j for j in range(mesh.n_nodes) if abs(mesh.nodes[j, axis] - hi[axis]) < tol]
        for i in lower:
            partners = [j for j in upper if np.allclose(mesh.nodes[i, others], mesh.nodes[j, others], atol=tol)]
            if len(partners) > 1:
                partners = [j for j in partners if signatures[j] == signatures[i]]
            pairs.update((i, j, axis) for j in partners)
    return pairs


class TestParse:
    def test_single_tet(self):
        mesh = parse_mesh(SINGLE_TET)
        assert mesh.summary()["tets"] == 1
        assert mesh.volume == pytest.approx(1.0 / 6.0)
        np.testing.assert_array_equal(mesh.tets, [[0, 1, 2, 3]])
        assert mesh.regions == [1]

    def test_optional_sections(self):
        text = SINGLE_TET + "FACESET base 1\n10 30 20\nDIRECTIONS 1\n7 0 0 2.0\n"
        mesh = parse_mesh(text)
        np.testing.assert_array_equal(mesh.face_sets["base"], [[0, 2, 1]])
        np.testing.assert_allclose(mesh.directions, [[0.0, 0.0, 1.0]])

    def test_serialized_mesh_reads_back(self, tmp_path):
        mesh = insert_cohesive(split_regions(structured_box_mesh((2, 1, 1))))
        directions = np.full((mesh.n_tets, 3), np.nan)
        directions[::2] = [0.0, 0.6, 0.8]
        mesh = replace(mesh, directions=directions)
        path = write_mesh(mesh, tmp_path / "rve.mesh")
        back = read_mesh(path)
        np.testing.assert_array_equal(back.nodes, mesh.nodes)
        np.testing.assert_array_equal(back.tets, mesh.tets)
        np.testing.assert_array_equal(back.cohesive, mesh.cohesive)
        np.testing.assert_array_equal(back.tet_regions, mesh.tet_regions)
        assert set(back.face_sets) == set(mesh.face_sets)
        np.testing.assert_allclose(back.directions, mesh.directions)

    def test_periodic_axis_names(self):
        mesh = structured_box_mesh((1, 1, 1))
        text = serialize_mesh(mesh) + "PERIODIC 1\n1 2 x\n"
        assert parse_mesh(text).periodic_pairs.tolist() == [[0, 1, 0]]

    @pytest.mark.parametrize("text,line", [
        (SINGLE_TET.replace("7 10 20 30 40 1", "7 10 20 30 99 1"), 8),
        (SINGLE_TET.replace("TETS 1", "TETS 2"), 7),
        (SINGLE_TET.replace("30 0 1 0", "30 0 1"), 5),
        (SINGLE_TET.replace("40 0 0 1", "40 0 0 one"), 6),
        (SINGLE_TET + "ELEMENTS 0\n", 9),
        (SINGLE_TET.replace("20 1 0 0", "10 1 0 0"), 4),
    ])
    def test_format_errors_report_line(self, text, line):
        with pytest.raises(MeshFormatError) as info:
            parse_mesh(text)
        assert info.value.line == line

    def test_missing_required_sections(self):
        with pytest.raises(MeshFormatError):
            parse_mesh("NODES 1\n1 0 0 0\n")

    def test_inverted_tet(self):
        with pytest.raises(MeshValidationError) as info:
            parse_mesh(SINGLE_TET.replace("7 10 20 30 40 1", "7 20 10 30 40 1"))
        assert info.value.line == 8

    def test_non_coincident_cohesive(self):
        text = SINGLE_TET + "COHESIVE 1\n1 10 20 30 10 20 40\n"
        with pytest.raises(MeshValidationError, match="not coincident"):
            parse_mesh(text)

    def test_bad_periodic_axis(self):
        with pytest.raises(MeshFormatError):
            parse_mesh(SINGLE_TET + "PERIODIC 1\n10 20 w\n")


class TestValidate:
    def test_pair_must_span_one_period(self):
        mesh = structured_box_mesh((2, 1, 1))
        bad = replace(mesh, periodic_pairs=np.array([[0, 1, 0]]))
        with pytest.raises(MeshValidationError, match="period"):
            validate_mesh(bad)

    def test_direction_rows_must_be_unit(self):
        mesh = structured_box_mesh((1, 1, 1))
        with pytest.raises(MeshValidationError, match="unit"):
            validate_mesh(replace(mesh, directions=np.full((mesh.n_tets, 3), 2.0)))


class TestBoundary:
    def test_cube_faces(self):
        mesh = structured_box_mesh((4, 2, 2))
        faces = boundary_faces(mesh)
        assert len(faces) == 2 * 2 * (2 * 2 + 4 * 2 + 4 * 2)
        assert faces.areas.sum() == pytest.approx(6.0)
        outward = np.einsum("ij,ij->i", faces.normals, mesh.nodes[faces.tris].mean(axis=1) - 0.5)
        assert np.all(outward > 0.0)

    def test_cohesive_surfaces_are_not_boundary(self):
        plain = structured_box_mesh((4, 2, 2))
        split = insert_cohesive(split_regions(plain))
        assert split.n_cohesive == 2 * 2 * 2
        faces = boundary_faces(split)
        assert len(faces) == len(boundary_faces(plain))
        assert faces.areas.sum() == pytest.approx(6.0)

    def test_box_face_sets(self):
        mesh = structured_box_mesh((2, 3, 1), (2.0, 3.0, 1.0))
        assert len(mesh.face_sets["xmin"]) == 2 * 3 * 1
        assert len(mesh.face_sets["zmax"]) == 2 * 2 * 3
        np.testing.assert_allclose(mesh.nodes[mesh.face_sets["ymax"]][..., 1], 3.0)


class TestPeriodicPairs:
    def test_matches_brute_force(self):
        mesh = structured_box_mesh((3, 2, 2), (1.5, 1.0, 0.5))
        found = {tuple(int(v) for v in row) for row in detect_periodic_pairs(mesh)}
        assert found == _brute_force_pairs(mesh)

    def test_split_nodes_pair_by_region(self):
        mesh = insert_cohesive(split_regions(structured_box_mesh((4, 2, 2))))
        found = {tuple(int(v) for v in row) for row in detect_periodic_pairs(mesh)}
        assert found == _brute_force_pairs(mesh)
        signatures = node_region_signatures(mesh)
        # split copies on the y and z faces keep to their own side of the interface
        assert all(signatures[m] == signatures[s] for m, s, axis in found if axis != 0)

    def test_each_slave_matched_once_per_axis(self):
        pairs = detect_periodic_pairs(structured_box_mesh((2, 2, 2)))
        for axis in range(3):
            slaves = pairs[pairs[:, 2] == axis, 1]
            assert len(slaves) == len(np.unique(slaves)) == 9

    def test_non_conforming_faces(self):
        mesh = structured_box_mesh((2, 2, 2))
        nodes = mesh.nodes.copy()
        moved = int(np.nonzero(
            (nodes[:, 0] == 1.0) & (nodes[:, 1] == 0.5) & (nodes[:, 2] == 0.5)
        )[0][0])
        nodes[moved, 1] += 0.01
        with pytest.raises(PeriodicMatchError) as info:
            detect_periodic_pairs(replace(mesh, nodes=nodes))
        assert moved in info.value.node_ids


class TestQuality:
    def test_structured_cube(self):
        quality = mesh_quality(structured_box_mesh((2, 2, 2)))
        assert quality.worst == pytest.approx(45.0)
        assert len(quality.poor) == 0

    def test_sliver_is_flagged(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.5, 0.5, 1e-3]], dtype=float)
        mesh = Mesh(nodes=nodes, tets=[[0, 1, 2, 3]], tet_regions=[1])
        quality = mesh_quality(mesh)
        assert quality.worst < 1.0
        np.testing.assert_array_equal(quality.poor, [0])

    def test_summary_counts(self):
        mesh = insert_cohesive(split_regions(structured_box_mesh((2, 1, 1))))
        summary = mesh.summary()
        assert summary["cohesive"] == mesh.n_cohesive > 0
        assert summary["regions"] == 2
        assert {"nodes", "tets", "periodic_pairs"} <= set(summary)
