"""
Fibrehom Tensor Core

Voigt conventions, stress invariants, the macro coordinate matrix and
local-to-global stiffness rotation.

Component ordering is [11, 22, 33, 12, 23, 31] everywhere. Strain vectors
carry engineering shears (2ε12, 2ε23, 2ε31); stress vectors carry the true
shear components. With that pairing a 6×6 stiffness maps strain vectors to
stress vectors and its entries equal the fourth-order tensor entries
C[I(ij), I(kl)] directly.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike

from .exceptions import ParameterError


VOIGT_PAIRS: Tuple[Tuple[int, int], ...] = (
    (0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0),
)

# tensor index pair -> Voigt slot, both orders
VOIGT_INDEX = np.empty((3, 3), dtype=int)
for _slot, (_i, _j) in enumerate(VOIGT_PAIRS):
    VOIGT_INDEX[_i, _j] = _slot
    VOIGT_INDEX[_j, _i] = _slot

# m = identity in Voigt form
VOIGT_IDENTITY = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

# strain-Voigt = SHEAR_DOUBLING * (tensor components in Voigt order)
SHEAR_DOUBLING = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])

# η = DEVIATOR @ σ for stress-kind vectors
DEVIATOR = np.eye(6) - np.outer(VOIGT_IDENTITY, VOIGT_IDENTITY) / 3.0

ORTHONORMAL_TOL = 1e-12


class VoigtKind(Enum):
    """Whether a Voigt vector holds stress or (engineering) strain."""
    STRESS = "stress"
    STRAIN = "strain"


@dataclass(frozen=True)
class Voigt6:
    """
    Six-component stress or strain value.

    Attributes:
        components: Values in [11, 22, 33, 12, 23, 31] order
        kind: STRESS (true shears) or STRAIN (engineering shears)
    """
    components: np.ndarray
    kind: VoigtKind

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float).reshape(6)
        object.__setattr__(self, "components", comps)

    @classmethod
    def stress(cls, values: ArrayLike) -> "Voigt6":
        return cls(np.asarray(values, dtype=float), VoigtKind.STRESS)

    @classmethod
    def strain(cls, values: ArrayLike) -> "Voigt6":
        return cls(np.asarray(values, dtype=float), VoigtKind.STRAIN)

    @classmethod
    def from_tensor(cls, tensor: ArrayLike, kind: VoigtKind) -> "Voigt6":
        """Build from a symmetric 3×3 tensor."""
        if kind is VoigtKind.STRESS:
            return cls(tensor_to_stress(tensor), kind)
        return cls(tensor_to_strain(tensor), kind)

    def to_tensor(self) -> np.ndarray:
        """Return the symmetric 3×3 tensor."""
        if self.kind is VoigtKind.STRESS:
            return stress_to_tensor(self.components)
        return strain_to_tensor(self.components)

    def __repr__(self) -> str:
        vals = ", ".join(f"{v:.6g}" for v in self.components)
        return f"Voigt6({self.kind.value}: [{vals}])"


def stress_to_tensor(sigma: ArrayLike) -> np.ndarray:
    """Stress Voigt vector to symmetric 3×3 tensor."""
    s = np.asarray(sigma, dtype=float)
    return np.array([
        [s[0], s[3], s[5]],
        [s[3], s[1], s[4]],
        [s[5], s[4], s[2]],
    ])


def strain_to_tensor(eps: ArrayLike) -> np.ndarray:
    """Engineering-strain Voigt vector to symmetric 3×3 tensor."""
    e = np.asarray(eps, dtype=float)
    return np.array([
        [e[0], 0.5 * e[3], 0.5 * e[5]],
        [0.5 * e[3], e[1], 0.5 * e[4]],
        [0.5 * e[5], 0.5 * e[4], e[2]],
    ])


def tensor_to_stress(tensor: ArrayLike) -> np.ndarray:
    t = np.asarray(tensor, dtype=float)
    return np.array([t[0, 0], t[1, 1], t[2, 2], t[0, 1], t[1, 2], t[2, 0]])


def tensor_to_strain(tensor: ArrayLike) -> np.ndarray:
    t = np.asarray(tensor, dtype=float)
    return np.array([
        t[0, 0], t[1, 1], t[2, 2], 2.0 * t[0, 1], 2.0 * t[1, 2], 2.0 * t[2, 0],
    ])


def voigt_to_tensor4(c_voigt: ArrayLike) -> np.ndarray:
    """Expand a 6×6 stiffness into the minor-symmetric 3×3×3×3 tensor."""
    c = np.asarray(c_voigt, dtype=float)
    return c[VOIGT_INDEX[:, :, None, None], VOIGT_INDEX[None, None, :, :]]


def tensor4_to_voigt(c_tensor: ArrayLike) -> np.ndarray:
    """Contract a minor-symmetric fourth-order tensor to a 6×6 stiffness."""
    c = np.asarray(c_tensor, dtype=float)
    out = np.empty((6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            out[a, b] = c[i, j, k, l]
    return out


@dataclass(frozen=True)
class Basis3:
    """
    Right-handed orthonormal frame.

    The vectors are the local axes expressed in global coordinates, so
    ``matrix @ v_local`` gives global components.

    Attributes:
        e1, e2, e3: Unit vectors; e3 is the fibre/yarn axis for yarn materials
    """
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray

    def __post_init__(self):
        vecs = [np.asarray(v, dtype=float).reshape(3) for v in (self.e1, self.e2, self.e3)]
        for name, v in zip(("e1", "e2", "e3"), vecs):
            object.__setattr__(self, name, v)
        q = np.column_stack(vecs)
        if not np.allclose(q.T @ q, np.eye(3), rtol=0.0, atol=ORTHONORMAL_TOL * 10):
            raise ParameterError("basis", q.tolist(), "vectors are not orthonormal")
        if np.dot(np.cross(vecs[0], vecs[1]), vecs[2]) <= 0.0:
            raise ParameterError("basis", q.tolist(), "frame is not right-handed")

    @property
    def matrix(self) -> np.ndarray:
        """3×3 rotation with e1, e2, e3 as columns."""
        return np.column_stack((self.e1, self.e2, self.e3))

    @classmethod
    def global_axes(cls) -> "Basis3":
        return cls(np.eye(3)[0], np.eye(3)[1], np.eye(3)[2])

    @classmethod
    def from_matrix(cls, q: ArrayLike) -> "Basis3":
        """Build from a rotation matrix whose columns are the local axes."""
        q = np.asarray(q, dtype=float)
        return cls(q[:, 0], q[:, 1], q[:, 2])

    @classmethod
    def from_axis(cls, direction: ArrayLike) -> "Basis3":
        """
        Complete a frame around a given e3.

        The transverse pair starts from the global axis least aligned with
        the direction, so the result is a deterministic function of it.

        Args:
            direction: Non-zero 3-vector for e3 (normalised here)

        Returns:
            Basis3 with e3 parallel to direction
        """
        d = np.asarray(direction, dtype=float).reshape(3)
        norm = np.linalg.norm(d)
        if norm == 0.0 or not np.isfinite(norm):
            raise ParameterError("direction", d.tolist(), "must be a finite non-zero vector")
        d = d / norm
        seed = np.zeros(3)
        seed[int(np.argmin(np.abs(d)))] = 1.0
        e1 = seed - np.dot(seed, d) * d
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(d, e1)
        return cls(e1, e2, d)

    def transposed(self) -> "Basis3":
        """The inverse rotation as a basis."""
        return Basis3.from_matrix(self.matrix.T)

    def __repr__(self) -> str:
        return f"Basis3(e3={np.round(self.e3, 6).tolist()})"


def invariants(sigma: ArrayLike) -> Tuple[float, float, np.ndarray]:
    """
    Stress invariants for the paraboloidal yield surface.

    Args:
        sigma: Stress-kind Voigt vector

    Returns:
        (I1, J2, eta) with eta the deviatoric stress in Voigt form

    Example:
        >>> invariants([0, 0, 0, 2.0, 0, 0])[1]
        4.0
    """
    s = np.asarray(sigma, dtype=float)
    i1 = float(s[0] + s[1] + s[2])
    eta = s - (i1 / 3.0) * VOIGT_IDENTITY
    j2 = 0.5 * float(
        eta[0] ** 2 + eta[1] ** 2 + eta[2] ** 2
        + 2.0 * (eta[3] ** 2 + eta[4] ** 2 + eta[5] ** 2)
    )
    return i1, j2, eta


def coordinate_matrix(y: ArrayLike) -> np.ndarray:
    """
    The 3×6 matrix X(y) with u = X(y) ε̄ for a homogeneous macro strain.

    Columns follow [11, 22, 33, 12, 23, 31]; each engineering shear couples
    two coordinates with weight 1/2.
    """
    y1, y2, y3 = np.asarray(y, dtype=float).reshape(3)
    return np.array([
        [y1, 0.0, 0.0, 0.5 * y2, 0.0, 0.5 * y3],
        [0.0, y2, 0.0, 0.5 * y1, 0.5 * y3, 0.0],
        [0.0, 0.0, y3, 0.0, 0.5 * y2, 0.5 * y1],
    ])


def coordinate_matrices(points: ArrayLike) -> np.ndarray:
    """Stacked X(y) for an (n, 3) array of points; shape (n, 3, 6)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    out = np.zeros((p.shape[0], 3, 6))
    out[:, 0, 0] = p[:, 0]
    out[:, 1, 1] = p[:, 1]
    out[:, 2, 2] = p[:, 2]
    out[:, 0, 3] = 0.5 * p[:, 1]
    out[:, 1, 3] = 0.5 * p[:, 0]
    out[:, 1, 4] = 0.5 * p[:, 2]
    out[:, 2, 4] = 0.5 * p[:, 1]
    out[:, 0, 5] = 0.5 * p[:, 2]
    out[:, 2, 5] = 0.5 * p[:, 0]
    return out


def macro_displacement(eps_bar: ArrayLike, y: ArrayLike) -> np.ndarray:
    """Displacement X(y)·ε̄ of the homogeneous macro-strain field at y."""
    return coordinate_matrix(y) @ np.asarray(eps_bar, dtype=float).reshape(6)


def rotate_stiffness(c_local: ArrayLike, basis: Basis3) -> np.ndarray:
    """
    Rotate a 6×6 stiffness from the basis frame into global axes.

    Uses the full fourth-order transform C'_ijkl = Q_ia Q_jb Q_kc Q_ld C_abcd.

    Args:
        c_local: Stiffness in the local frame of basis
        basis: Local frame expressed in global coordinates

    Returns:
        Symmetrised 6×6 global stiffness
    """
    if not isinstance(basis, Basis3):
        raise ParameterError("basis", basis, "expected a Basis3")
    q = basis.matrix
    c4 = voigt_to_tensor4(c_local)
    rotated = np.einsum("ia,jb,kc,ld,abcd->ijkl", q, q, q, q, c4, optimize=True)
    out = tensor4_to_voigt(rotated)
    return 0.5 * (out + out.T)


def rotate_stress(sigma: ArrayLike, rotation: ArrayLike) -> np.ndarray:
    """Q σ Qᵀ for a stress-kind Voigt vector."""
    q = np.asarray(rotation, dtype=float)
    return tensor_to_stress(q @ stress_to_tensor(sigma) @ q.T)


def rotate_strain(eps: ArrayLike, rotation: ArrayLike) -> np.ndarray:
    """Q ε Qᵀ for a strain-kind Voigt vector."""
    q = np.asarray(rotation, dtype=float)
    return tensor_to_strain(q @ strain_to_tensor(eps) @ q.T)


def isotropic_stiffness(young: float, poisson: float) -> np.ndarray:
    """
    Isotropic 6×6 stiffness from Young's modulus and Poisson's ratio.

    Raises:
        ParameterError: If E <= 0 or ν is outside (-1, 0.5)
    """
    if not young > 0.0:
        raise ParameterError("E", young, "must be positive")
    if not -1.0 < poisson < 0.5:
        raise ParameterError("nu", poisson, "must lie in (-1, 0.5)")
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    c = np.zeros((6, 6))
    c[:3, :3] = lam
    c[np.arange(3), np.arange(3)] += 2.0 * mu
    c[np.arange(3, 6), np.arange(3, 6)] = mu
    return c


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation matrix."""
    a = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(a)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q
