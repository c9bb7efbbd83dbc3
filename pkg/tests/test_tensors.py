"""Tests for Voigt conventions, invariants and stiffness rotation."""

import numpy as np
import pytest

from fibrehom.exceptions import ParameterError
from fibrehom.tensors import (
    Basis3,
    Voigt6,
    VoigtKind,
    coordinate_matrices,
    coordinate_matrix,
    invariants,
    isotropic_stiffness,
    macro_displacement,
    random_rotation,
    rotate_stiffness,
    rotate_strain,
    rotate_stress,
)


class TestVoigt:
    def test_strain_tensor_halves_shears(self):
        eps = Voigt6.strain([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
        t = eps.to_tensor()
        assert t[0, 1] == pytest.approx(0.2)
        assert t[1, 2] == pytest.approx(0.25)
        assert t[2, 0] == pytest.approx(0.3)
        back = Voigt6.from_tensor(t, VoigtKind.STRAIN)
        np.testing.assert_allclose(back.components, eps.components)

    def test_stress_tensor_keeps_shears(self):
        t = Voigt6.stress([1, 2, 3, 4, 5, 6]).to_tensor()
        np.testing.assert_allclose(t, t.T)
        assert t[0, 1] == 4.0

    def test_work_conjugacy(self):
        """σ·ε in Voigt form equals the tensor double contraction."""
        rng = np.random.default_rng(0)
        s = Voigt6.stress(rng.normal(size=6))
        e = Voigt6.strain(rng.normal(size=6))
        assert s.components @ e.components == pytest.approx(np.sum(s.to_tensor() * e.to_tensor()))


class TestInvariants:
    def test_pure_shear(self):
        i1, j2, eta = invariants([0, 0, 0, 2.0, 0, 0])
        assert i1 == 0.0
        assert j2 == pytest.approx(4.0)
        np.testing.assert_allclose(eta, [0, 0, 0, 2.0, 0, 0])

    def test_hydrostatic_has_no_deviator(self):
        i1, j2, eta = invariants([5.0, 5.0, 5.0, 0, 0, 0])
        assert i1 == 15.0
        assert j2 == pytest.approx(0.0)
        np.testing.assert_allclose(eta, 0.0, atol=1e-14)

    def test_uniaxial(self):
        _, j2, _ = invariants([3.0, 0, 0, 0, 0, 0])
        assert j2 == pytest.approx(3.0)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            sigma = rng.normal(scale=50.0, size=6)
            q = random_rotation(rng)
            i1, j2, eta = invariants(sigma)
            i1_r, j2_r, eta_r = invariants(rotate_stress(sigma, q))
            assert j2 >= 0.0
            assert i1_r == pytest.approx(i1, abs=1e-9)
            assert j2_r == pytest.approx(j2, rel=1e-10)
            np.testing.assert_allclose(eta_r, rotate_stress(eta, q), atol=1e-9)


class TestCoordinateMatrix:
    def test_reproduces_homogeneous_strain(self):
        """The symmetric gradient of u = X(y) ε̄ is ε̄."""
        eps = np.array([0.01, -0.02, 0.03, 0.004, -0.005, 0.006])
        h = 1e-3
        y0 = np.array([0.3, -0.7, 1.1])
        grad = np.column_stack([
            (macro_displacement(eps, y0 + h * e) - macro_displacement(eps, y0 - h * e)) / (2 * h)
            for e in np.eye(3)
        ])
        sym = 0.5 * (grad + grad.T)
        np.testing.assert_allclose(Voigt6.from_tensor(sym, VoigtKind.STRAIN).components, eps, atol=1e-12)

    def test_stacked_matches_single(self):
        pts = np.random.default_rng(1).normal(size=(5, 3))
        stacked = coordinate_matrices(pts)
        for p, x in zip(pts, stacked):
            np.testing.assert_array_equal(coordinate_matrix(p), x)


class TestRotation:
    def test_identity_basis_is_noop(self):
        c = isotropic_stiffness(100.0, 0.25)
        np.testing.assert_allclose(rotate_stiffness(c, Basis3.global_axes()), c, atol=1e-12)

    def test_isotropic_invariant_under_rotation(self):
        c = isotropic_stiffness(3760.0, 0.39)
        q = random_rotation(np.random.default_rng(2))
        np.testing.assert_allclose(rotate_stiffness(c, Basis3.from_matrix(q)), c, atol=1e-9)

    def test_axis_to_x_swaps_11_and_33(self):
        c = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        c[0, 2] = c[2, 0] = 0.5
        rotated = rotate_stiffness(c, Basis3.from_axis([1.0, 0.0, 0.0]))
        # local frame (y, z, x): fibre axis along global x
        assert rotated[0, 0] == pytest.approx(3.0)
        assert rotated[1, 1] == pytest.approx(1.0)
        assert rotated[2, 2] == pytest.approx(2.0)

    def test_rotation_preserves_eigenvalues(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(6, 6))
        c = a @ a.T + 6 * np.eye(6)
        q = random_rotation(rng)
        # eigenvalues of the Mandel form are rotation invariant
        mandel = np.diag([1, 1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2)])
        before = np.linalg.eigvalsh(mandel @ c @ mandel)
        after = np.linalg.eigvalsh(mandel @ rotate_stiffness(c, Basis3.from_matrix(q)) @ mandel)
        np.testing.assert_allclose(np.sort(after), np.sort(before), rtol=1e-9)

    def test_stress_and_strain_rotate_consistently(self):
        rng = np.random.default_rng(4)
        c = isotropic_stiffness(200.0, 0.3)
        q = random_rotation(rng)
        eps = rng.normal(size=6)
        np.testing.assert_allclose(rotate_stress(c @ eps, q), c @ rotate_strain(eps, q), atol=1e-9)

    def test_from_axis_is_right_handed(self):
        basis = Basis3.from_axis([1.0, 2.0, -0.5])
        np.testing.assert_allclose(basis.e3, np.array([1.0, 2.0, -0.5]) / np.linalg.norm([1.0, 2.0, -0.5]))
        assert np.linalg.det(basis.matrix) == pytest.approx(1.0)

    def test_non_orthonormal_basis_rejected(self):
        with pytest.raises(ParameterError):
            Basis3([1, 0, 0], [1, 1, 0], [0, 0, 1])

    def test_zero_axis_rejected(self):
        with pytest.raises(ParameterError):
            Basis3.from_axis([0, 0, 0])


class TestIsotropicStiffness:
    def test_epoxy_entries(self):
        c = isotropic_stiffness(3760.0, 0.39)
        expected_c11 = 3760.0 * 0.61 / (1.39 * 0.22)
        assert c[0, 0] == pytest.approx(expected_c11)
        assert c[3, 3] == pytest.approx(3760.0 / 2.78)
        np.testing.assert_allclose(c, c.T)

    @pytest.mark.parametrize("nu", [0.5, -1.0, 0.7])
    def test_invalid_poisson(self, nu):
        with pytest.raises(ParameterError):
            isotropic_stiffness(1.0, nu)
