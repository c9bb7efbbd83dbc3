"""
Fibrehom Cohesive Interface

Linear-softening traction-separation law with scalar damage and the
6-node zero-thickness interface element.

    E0 = Em / h,   δ0 = ft / E0,   δmax = 2 Gf / ft
    ω(κ) = δmax (κ − δ0) / (κ (δmax − δ0)),  clamped to [0, 1]

The traction on the loading envelope falls linearly from ft at δ0 to zero
at δmax, and the area under the curve is Gf. Unloading is secant to the
origin. Interpenetration is resisted by the undamaged penalty E0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..config import DEFAULT_INTERFACE_THICKNESS, DEFAULT_SHEAR_WEIGHT
from ..exceptions import MeshValidationError, ParameterError

logger = logging.getLogger(__name__)

# 3-point triangle rule, weights A/3
GAUSS_POINTS = np.array([[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]])
SHAPE_AT_GAUSS = np.column_stack(
    (1.0 - GAUSS_POINTS[:, 0] - GAUSS_POINTS[:, 1], GAUSS_POINTS[:, 0], GAUSS_POINTS[:, 1])
)
MIN_AREA = 1e-14


def parse_strength(value: Any) -> float:
    """Accept numbers, "inf" and None (unlimited) for interface strengths."""
    if value is None:
        return math.inf
    if isinstance(value, str):
        return float(value.strip().lower().replace("infinity", "inf"))
    return float(value)


@dataclass(frozen=True)
class CohesiveParams:
    """
    Interface constants.

    Attributes:
        ft: Cohesive strength (MPa); infinite means a perfectly bonded interface
        Gf: Fracture energy (N/mm)
        beta: Weight of the shear jumps in the effective jump
        Em: Matrix Young's modulus used for the penalty stiffness (MPa)
        h: Nominal interface thickness (mm)
    """
    ft: float
    Gf: float
    beta: float = DEFAULT_SHEAR_WEIGHT
    Em: float = 3760.0
    h: float = DEFAULT_INTERFACE_THICKNESS

    def __post_init__(self):
        object.__setattr__(self, "ft", parse_strength(self.ft))
        for name in ("ft", "Gf", "Em", "h"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(name, getattr(self, name), "must be positive")
        if not self.beta >= 0.0:
            raise ParameterError("beta", self.beta, "must be non-negative")
        if not self.tied and not 2.0 * self.Gf * self.E0 > self.ft ** 2:
            raise ParameterError(
                "Gf", self.Gf,
                f"2*Gf*E0 must exceed ft^2 ({2.0 * self.Gf * self.E0:.6g} <= {self.ft ** 2:.6g})",
            )

    @property
    def tied(self) -> bool:
        """True for unlimited strength; such interfaces are bonded, not modelled."""
        return math.isinf(self.ft)

    @property
    def E0(self) -> float:
        return self.Em / self.h

    @property
    def delta0(self) -> float:
        return self.ft / self.E0

    @property
    def delta_max(self) -> float:
        return 2.0 * self.Gf / self.ft

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ft": "inf" if self.tied else self.ft,
            "Gf": self.Gf,
            "beta": self.beta,
            "Em": self.Em,
            "h": self.h,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CohesiveParams":
        unknown = set(d) - {"ft", "Gf", "beta", "Em", "h", "regions"}
        if unknown:
            raise ParameterError("interface", sorted(unknown), "unknown keys")
        return cls(
            ft=parse_strength(d.get("ft")),
            Gf=float(d["Gf"]),
            beta=float(d.get("beta", DEFAULT_SHEAR_WEIGHT)),
            Em=float(d.get("Em", 3760.0)),
            h=float(d.get("h", DEFAULT_INTERFACE_THICKNESS)),
        )


@dataclass(frozen=True)
class CohesiveState:
    """History of one interface integration point."""
    kappa: float = 0.0

    def damage(self, p: CohesiveParams) -> float:
        return damage(self.kappa, p)


def effective_jump(delta_n: float, delta_s1: float, delta_s2: float, beta: float) -> float:
    """√(⟨δn⟩² + β(δs1² + δs2²)); closing jumps do not count."""
    dn = max(delta_n, 0.0)
    return math.sqrt(dn * dn + beta * (delta_s1 * delta_s1 + delta_s2 * delta_s2))


def damage(kappa: float, p: CohesiveParams) -> float:
    """
    Damage for a history value κ.

    Returns:
        0 up to δ0, 1 from δmax on, linear-softening-consistent in between
    """
    return float(_damage(np.asarray([kappa], dtype=float), p)[0])


def _damage(kappa: np.ndarray, p: CohesiveParams) -> np.ndarray:
    if p.tied:
        return np.zeros_like(kappa)
    d0, dm = p.delta0, p.delta_max
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = dm * (kappa - d0) / (kappa * (dm - d0))
    return np.where(kappa <= d0, 0.0, np.clip(omega, 0.0, 1.0))


def _damage_slope(kappa: np.ndarray, p: CohesiveParams) -> np.ndarray:
    if p.tied:
        return np.zeros_like(kappa)
    d0, dm = p.delta0, p.delta_max
    inside = (kappa > d0) & (kappa < dm)
    safe = np.where(inside, kappa, 1.0)
    return np.where(inside, dm * d0 / (safe ** 2 * (dm - d0)), 0.0)


def traction_batch(
    jumps: np.ndarray, kappa: np.ndarray, p: CohesiveParams
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorised traction update.

    Args:
        jumps: (q, 3) local jumps (δn, δs1, δs2)
        kappa: (q,) history values from the last converged step
        p: Interface constants

    Returns:
        (tractions (q, 3), tangents (q, 3, 3), kappa_new (q,), damage (q,))
    """
    jumps = np.asarray(jumps, dtype=float).reshape(-1, 3)
    kappa = np.asarray(kappa, dtype=float).reshape(-1)
    opening = np.maximum(jumps[:, 0], 0.0)
    weights = np.array([1.0, p.beta, p.beta])
    active = jumps.copy()
    active[:, 0] = opening
    delta = np.sqrt(np.einsum("qi,i,qi->q", active, weights, active))

    kappa_new = np.maximum(kappa, delta)
    omega = _damage(kappa_new, p)
    e0 = p.E0
    scale = (1.0 - omega) * e0

    traction = scale[:, None] * jumps
    closing = jumps[:, 0] < 0.0
    traction[closing, 0] = e0 * jumps[closing, 0]

    tangent = np.zeros((len(jumps), 3, 3))
    tangent[:, [0, 1, 2], [0, 1, 2]] = scale[:, None]
    tangent[closing, 0, 0] = e0

    # softening term, only while the envelope is being extended
    loading = (delta >= kappa) & (delta > 0.0)
    slope = _damage_slope(kappa_new, p) * loading
    if np.any(slope > 0.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            d_delta = np.where(loading[:, None], weights * active / delta[:, None], 0.0)
        tangent -= e0 * slope[:, None, None] * np.einsum("qi,qj->qij", active, d_delta)
    return traction, tangent, kappa_new, omega


def traction(
    jump: Sequence[float], state: CohesiveState, p: CohesiveParams
) -> Tuple[np.ndarray, CohesiveState, np.ndarray]:
    """
    Traction, updated history and local tangent for one point.

    Args:
        jump: (δn, δs1, δs2)
        state: Converged history
        p: Interface constants

    Returns:
        (t_local, state_new, D_local)
    """
    t, d, kappa_new, _ = traction_batch(np.asarray(jump, dtype=float).reshape(1, 3), np.array([state.kappa]), p)
    return t[0], CohesiveState(float(kappa_new[0])), d[0]


# 6-node element

def _jump_operators() -> np.ndarray:
    """Φ at each Gauss point: (3, 3, 18), jump = Φ u with u = [bottom, top]."""
    phi = np.zeros((3, 3, 18))
    eye = np.eye(3)
    for g, shape in enumerate(SHAPE_AT_GAUSS):
        for a in range(3):
            phi[g, :, 3 * a : 3 * a + 3] = -shape[a] * eye
            phi[g, :, 9 + 3 * a : 9 + 3 * a + 3] = shape[a] * eye
    return phi


JUMP_OPERATORS = _jump_operators()


def interface_frames(coords: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rotations to the local (n, s1, s2) frame and reference areas.

    Args:
        coords: (k, 6, 3) reference coordinates, bottom then top
        u: (k, 18) element displacements

    Returns:
        (rotations (k, 3, 3) with rows n, s1, s2; areas (k,))
    """
    ref = coords[:, :3]
    ref_normal = np.cross(ref[:, 1] - ref[:, 0], ref[:, 2] - ref[:, 0])
    areas = 0.5 * np.linalg.norm(ref_normal, axis=1)
    bad = np.nonzero(areas < MIN_AREA)[0]
    if len(bad):
        raise MeshValidationError(f"cohesive element {int(bad[0])} is degenerate (area {areas[bad[0]]:.3e})")

    current = coords + u.reshape(-1, 6, 3)
    mid = 0.5 * (current[:, :3] + current[:, 3:])
    edge = mid[:, 1] - mid[:, 0]
    normal = np.cross(edge, mid[:, 2] - mid[:, 0])
    n_hat = normal / np.linalg.norm(normal, axis=1)[:, None]
    s1 = edge / np.linalg.norm(edge, axis=1)[:, None]
    s2 = np.cross(n_hat, s1)
    return np.stack((n_hat, s1, s2), axis=1), areas


def cohesive_elements(
    coords: np.ndarray,
    u: np.ndarray,
    kappa: np.ndarray,
    p: CohesiveParams,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Batched interface stiffness and internal force.

    Args:
        coords: (k, 6, 3) reference coordinates
        u: (k, 18) displacements
        kappa: (k, 3) converged histories per Gauss point
        p: Interface constants

    Returns:
        (K (k, 18, 18), F_int (k, 18), kappa_new (k, 3), damage (k, 3))
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 6, 3)
    u = np.asarray(u, dtype=float).reshape(-1, 18)
    kappa = np.asarray(kappa, dtype=float).reshape(-1, 3)
    rot, areas = interface_frames(coords, u)
    # B = R Φ per element and Gauss point: (k, 3, 3, 18)
    b = np.einsum("kij,gjd->kgid", rot, JUMP_OPERATORS)
    jumps = np.einsum("kgid,kd->kgi", b, u)
    t, d, kappa_new, omega = traction_batch(jumps.reshape(-1, 3), kappa.reshape(-1), p)
    t = t.reshape(-1, 3, 3)
    d = d.reshape(-1, 3, 3, 3)
    w = areas / 3.0
    f_int = np.einsum("k,kgid,kgi->kd", w, b, t)
    k_el = np.einsum("k,kgid,kgij,kgje->kde", w, b, d, b)
    return k_el, f_int, kappa_new.reshape(-1, 3), omega.reshape(-1, 3)


def cohesive_element(
    nodes: ArrayLike,
    u: ArrayLike,
    states: Sequence[CohesiveState],
    p: CohesiveParams,
) -> Tuple[np.ndarray, np.ndarray, List[CohesiveState]]:
    """
    Stiffness and internal force of one 6-node interface element.

    Args:
        nodes: (6, 3) coordinates, bottom triangle then matching top triangle
        u: 18 displacements in the same node order
        states: Three Gauss-point histories
        p: Interface constants

    Returns:
        (K_el (18, 18), F_int (18,), new states)
    """
    kappa = np.array([s.kappa for s in states], dtype=float)
    k_el, f_int, kappa_new, _ = cohesive_elements(
        np.asarray(nodes, dtype=float)[None], np.asarray(u, dtype=float)[None], kappa[None], p
    )
    return k_el[0], f_int[0], [CohesiveState(float(k)) for k in kappa_new[0]]


def dissipated_energy(p: CohesiveParams, steps: int = 2000) -> float:
    """
    Work done pulling one point monotonically from zero to δmax.

    Trapezoid integration of traction over jump; equals Gf up to the
    quadrature error of the piecewise-linear curve.
    """
    path = np.linspace(0.0, p.delta_max, steps + 1)
    jumps = np.zeros((len(path), 3))
    jumps[:, 0] = path
    kappa = 0.0
    tractions = []
    for jump in jumps:
        t, _, k_new, _ = traction_batch(jump[None], np.array([kappa]), p)
        kappa = float(k_new[0])
        tractions.append(t[0])
    tractions = np.array(tractions)
    work = np.einsum("qi,qi->q", 0.5 * (tractions[1:] + tractions[:-1]), np.diff(jumps, axis=0))
    return float(work.sum())
