"""Tests for the constrained Newton solver and homogenisation."""

import math

import numpy as np
import pytest

from fibrehom.constraints import BCKind
from fibrehom.exceptions import ConvergenceError, ParameterError
from fibrehom.materials.cohesive import CohesiveParams
from fibrehom.materials.matrix import drive_material_point, elastic_stiffness
from fibrehom.materials.regions import MatrixBinding, RegionSpec
from fibrehom.mesh import with_periodic_pairs
from fibrehom.mesher import MATRIX_REGION, insert_cohesive
from fibrehom.models import LoadProgram, LoadSegment, RunStatus, StiffnessOutput
from fibrehom.solver import NewtonReport, RVESolver, SolverOptions, inertia, run_program
from fibrehom.tensors import isotropic_stiffness

EPS = np.array([0.001, -0.0004, 0.0002, 0.0006, -0.0003, 0.0001])


@pytest.fixture
def matrix_only(elastic_epoxy) -> RegionSpec:
    return RegionSpec({MATRIX_REGION: MatrixBinding(elastic_epoxy)})


@pytest.fixture
def plastic_matrix(epoxy) -> RegionSpec:
    return RegionSpec({MATRIX_REGION: MatrixBinding(epoxy)})


def _assert_psd(matrix: np.ndarray, scale: float) -> None:
    eig = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    assert eig.min() >= -1e-8 * scale


class TestOptions:
    def test_invalid(self):
        with pytest.raises(ParameterError):
            SolverOptions(rtol=0.0)
        with pytest.raises(ParameterError):
            SolverOptions(max_bisections=-1)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ParameterError):
            SolverOptions.from_dict({"rtol": 1e-6, "line_search": True})

    def test_round_trip(self):
        options = SolverOptions(rtol=1e-7, max_bisections=3)
        assert SolverOptions.from_dict(options.to_dict()) == options


class TestElasticHomogenisation:
    @pytest.mark.parametrize("kind", list(BCKind))
    def test_homogeneous_cube_returns_material_stiffness(self, cube, matrix_only, elastic_epoxy, kind):
        solver = RVESolver(cube, matrix_only, kind)
        expected = elastic_stiffness(elastic_epoxy)
        np.testing.assert_allclose(solver.homogenized_stiffness(), expected, rtol=1e-8, atol=1e-8 * expected.max())

    def test_boundary_condition_ordering(self, bimaterial_cube, elastic_regions):
        c = {kind: RVESolver(bimaterial_cube, elastic_regions, kind).homogenized_stiffness() for kind in BCKind}
        ld, per, ut = c[BCKind.LINEAR_DISPLACEMENT], c[BCKind.PERIODIC], c[BCKind.UNIFORM_TRACTION]
        scale = np.abs(ld).max()
        _assert_psd(ld - per, scale)
        _assert_psd(per - ut, scale)
        # the layered cube is stiffer along the layers than across them
        assert per[1, 1] > per[0, 0]

    def test_within_voigt_and_reuss_bounds(self, bimaterial_cube, elastic_regions, elastic_epoxy):
        c_m = elastic_stiffness(elastic_epoxy)
        c_f = isotropic_stiffness(74000.0, 0.2)
        voigt = 0.5 * (c_m + c_f)
        reuss = np.linalg.inv(0.5 * (np.linalg.inv(c_m) + np.linalg.inv(c_f)))
        scale = voigt.max()
        for kind in BCKind:
            c = RVESolver(bimaterial_cube, elastic_regions, kind).homogenized_stiffness()
            _assert_psd(voigt - c, scale)
            _assert_psd(c - reuss, scale)

    def test_periodic_laminate_is_exact(self, bimaterial_cube, elastic_regions, elastic_epoxy):
        """Layers stacked along x: the transverse modulus follows the Reuss average of C11."""
        c_m = elastic_stiffness(elastic_epoxy)
        c_f = isotropic_stiffness(74000.0, 0.2)
        per = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC).homogenized_stiffness()
        # with the other strains fixed, σ11 is continuous across the layers
        assert per[0, 0] == pytest.approx(1.0 / (0.5 / c_m[0, 0] + 0.5 / c_f[0, 0]), rel=1e-8)
        assert per[3, 3] == pytest.approx(1.0 / (0.5 / c_m[3, 3] + 0.5 / c_f[3, 3]), rel=1e-8)

    def test_stiffness_is_symmetric(self, bimaterial_cube, elastic_regions):
        c = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC).homogenized_stiffness()
        np.testing.assert_allclose(c, c.T, rtol=1e-8, atol=1e-8 * np.abs(c).max())


class TestNewton:
    def test_zero_strain_gives_zero_displacement(self, bimaterial_cube, elastic_regions):
        solver = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC)
        result = solver.newton_solve(np.zeros(6))
        assert result.report.iterations == 0
        np.testing.assert_array_equal(result.u, 0.0)

    @pytest.mark.parametrize("kind", list(BCKind))
    def test_elastic_converges_in_one_iteration(self, bimaterial_cube, elastic_regions, kind):
        solver = RVESolver(bimaterial_cube, elastic_regions, kind)
        assert solver.newton_solve(EPS).report.iterations == 1

    def test_newton_does_not_commit(self, bimaterial_cube, elastic_regions):
        solver = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC)
        solver.newton_solve(EPS)
        np.testing.assert_array_equal(solver.u, 0.0)
        np.testing.assert_array_equal(solver.strain, 0.0)

    def test_observed_order(self):
        assert NewtonReport(3, [1.0, 1e-2, 1e-4, 1e-8]).observed_order == pytest.approx(2.0)
        assert NewtonReport(1, [1.0, 1e-9]).observed_order is None

    def test_yielding_step_converges_quickly(self, cube, plastic_matrix):
        solver = RVESolver(cube, plastic_matrix, BCKind.PERIODIC)
        solver.advance(np.array([0.006, 0.0, 0.0, 0.0, 0.0, 0.0]))
        result = solver.newton_solve(np.array([0.007, 0.0, 0.0, 0.0, 0.0, 0.0]))
        assert result.assembly.plastic_points > 0
        assert 1 < result.report.iterations <= 6


class TestConsistency:
    @pytest.mark.parametrize("kind", list(BCKind))
    def test_homogenised_stress_equals_volume_average(self, bimaterial_cube, elastic_regions, kind):
        solver = RVESolver(bimaterial_cube, elastic_regions, kind)
        solver.advance(EPS)
        sigma = solver.homogenized_stress()
        np.testing.assert_allclose(solver.average_stress(), sigma, rtol=1e-7, atol=1e-7 * np.abs(sigma).max())

    @pytest.mark.parametrize("kind", list(BCKind))
    def test_macro_work_matches_boundary_work(self, bimaterial_cube, elastic_regions, kind):
        solver = RVESolver(bimaterial_cube, elastic_regions, kind)
        solver.advance(EPS)
        macro = solver.homogenized_stress() @ EPS
        assert solver.boundary_work() / solver.volume == pytest.approx(macro, rel=1e-7)

    def test_superposition(self, bimaterial_cube, elastic_regions):
        solver = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC)
        c_bar = solver.homogenized_stiffness()
        other = np.array([-0.0002, 0.0007, 0.0, 0.0, 0.0004, 0.0])
        stresses = []
        for eps in (EPS, other, EPS + other):
            solver.reset()
            solver.advance(eps)
            stresses.append(solver.homogenized_stress())
        scale = np.abs(stresses[2]).max()
        np.testing.assert_allclose(stresses[0] + stresses[1], stresses[2], atol=1e-8 * scale)
        np.testing.assert_allclose(c_bar @ (EPS + other), stresses[2], atol=1e-8 * scale)

    def test_tied_interface_matches_unsplit(self, bimaterial_cube, elastic_regions):
        split = with_periodic_pairs(insert_cohesive(bimaterial_cube))
        tied = RVESolver(split, elastic_regions, BCKind.PERIODIC, CohesiveParams(ft=math.inf, Gf=0.002))
        plain = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC)
        c_tied, c_plain = tied.homogenized_stiffness(), plain.homogenized_stiffness()
        np.testing.assert_allclose(c_tied, c_plain, rtol=1e-8, atol=1e-8 * np.abs(c_plain).max())

    def test_stiff_interface_approaches_tied(self, bimaterial_cube, elastic_regions):
        split = with_periodic_pairs(insert_cohesive(bimaterial_cube))
        bonded = RVESolver(split, elastic_regions, BCKind.PERIODIC, CohesiveParams(ft=50.0, Gf=0.002))
        plain = RVESolver(bimaterial_cube, elastic_regions, BCKind.PERIODIC)
        c_bonded, c_plain = bonded.homogenized_stiffness(), plain.homogenized_stiffness()
        # penalty stiffness E0 is a thousand times the matrix modulus per mm
        np.testing.assert_allclose(c_bonded, c_plain, rtol=0.01, atol=0.01 * np.abs(c_plain).max())
        assert c_bonded[0, 0] < c_plain[0, 0]


class TestPrograms:
    def test_calibration_cube_matches_material_point(self, cube, plastic_matrix, epoxy):
        target = np.array([0.02, -0.006, -0.006, 0.004, 0.0, 0.0])
        steps = 10
        program = LoadProgram((LoadSegment(tuple(target), steps),))
        result = RVESolver(cube, plastic_matrix, BCKind.PERIODIC).run_program(program)
        path = target * np.arange(1, steps + 1)[:, None] / steps
        point = drive_material_point(epoxy, path, controlled=tuple(range(6)))
        np.testing.assert_allclose(
            result.stresses, point.stress[1:], rtol=1e-6, atol=1e-6 * np.abs(point.stress).max()
        )

    def test_mixed_control_gives_uniaxial_stress(self, cube, matrix_only, elastic_epoxy):
        program = LoadProgram.uniaxial("11", 0.002, 2, free=("22", "33"))
        result = RVESolver(cube, matrix_only, BCKind.PERIODIC).run_program(program)
        last = result.steps[-1]
        assert abs(last.stress[1]) <= 1e-5 * last.stress[0]
        assert abs(last.stress[2]) <= 1e-5 * last.stress[0]
        assert last.strain[1] == pytest.approx(-elastic_epoxy.nu * 0.002, rel=1e-5)
        assert last.stress[0] == pytest.approx(elastic_epoxy.E * 0.002, rel=1e-5)

    def test_records_and_outputs(self, cube, matrix_only):
        program = LoadProgram(
            (LoadSegment((0.001, 0, 0, 0, 0, 0), 3),),
            stiffness=StiffnessOutput.LAST,
            snapshot_every=1,
        )
        seen = []
        result = RVESolver(cube, matrix_only, BCKind.PERIODIC).run_program(program, on_step=seen.append)
        assert [r.step for r in result.steps] == [1, 2, 3]
        assert all(a is b for a, b in zip(seen, result.steps)) and len(seen) == 3
        assert result.status is RunStatus.CONVERGED
        assert result.steps[-1].stiffness is not None and result.steps[0].stiffness is None
        assert len(result.snapshots) == 3
        assert result.snapshots[-1].displacement.shape == (cube.n_nodes, 3)
        np.testing.assert_allclose(result.strains[:, 0], [0.001 / 3, 0.002 / 3, 0.001])

    def test_unloading_returns_elastically(self, cube, plastic_matrix):
        program = LoadProgram((
            LoadSegment((0.01, 0, 0, 0, 0, 0), 10),
            LoadSegment((0.009, 0, 0, 0, 0, 0), 1),
        ))
        result = run_program(cube, plastic_matrix, program, BCKind.PERIODIC)
        loaded, unloaded = result.steps[-2], result.steps[-1]
        drop = loaded.stress[0] - unloaded.stress[0]
        c11 = elastic_stiffness(plastic_matrix.matrix_params)[0, 0]
        assert drop == pytest.approx(c11 * 0.001, rel=1e-6)

    def test_failed_step_keeps_converged_steps(self, cube, plastic_matrix):
        program = LoadProgram((
            LoadSegment((0.0005, 0, 0, 0, 0, 0), 1),
            LoadSegment((0.05, 0, 0, 0, 0, 0), 1),
        ))
        options = SolverOptions(max_iterations=1, max_bisections=0)
        solver = RVESolver(cube, plastic_matrix, BCKind.PERIODIC, options=options)
        with pytest.raises(ConvergenceError) as info:
            solver.run_program(program)
        error = info.value
        assert error.step == 2
        assert error.result.status is RunStatus.FAILED
        assert len(error.result.steps) == 1
        np.testing.assert_allclose(error.last_good_strain, [0.0005, 0, 0, 0, 0, 0])

    def test_singular_free_tangent_fails_cleanly(self, cube, matrix_only, monkeypatch):
        exact = RVESolver.homogenized_stiffness

        def without_22(self):
            c = exact(self).copy()
            c[1, :] = c[:, 1] = 0.0
            return c

        monkeypatch.setattr(RVESolver, "homogenized_stiffness", without_22)
        program = LoadProgram.uniaxial("11", 0.002, 2, free=("22",))
        with pytest.raises(ConvergenceError) as info:
            RVESolver(cube, matrix_only, BCKind.PERIODIC).run_program(program)
        error = info.value
        assert str(error) == "Load step 1 failed to converge: homogenised tangent is singular on the free components"
        assert error.step == 1
        assert error.result.status is RunStatus.FAILED
        assert error.result.steps == []
        np.testing.assert_array_equal(error.last_good_strain, np.zeros(6))

    def test_bisection_recovers(self, cube, plastic_matrix):
        options = SolverOptions(max_iterations=4, max_bisections=10)
        solver = RVESolver(cube, plastic_matrix, BCKind.PERIODIC, options=options)
        iterations, substeps = solver.advance(np.array([0.04, 0, 0, 0, 0, 0]))
        assert substeps > 1
        np.testing.assert_allclose(solver.strain, [0.04, 0, 0, 0, 0, 0])


def test_inertia_of_small_saddle_matrix():
    from scipy import sparse

    k = sparse.csr_matrix(np.diag([2.0, 3.0]))
    c = sparse.csr_matrix(np.array([[1.0, 0.0]]))
    matrix = sparse.bmat([[k, c.T], [c, None]])
    assert inertia(matrix) == (2, 1, 0)
