"""
Fibrehom Matrix Material

Elasto-plastic polymer matrix: paraboloidal yield surface, non-associative
flow controlled by the plastic Poisson's ratio, and tension/compression
hardening driven by two internal variables.

    f = 6 J2 + 2 I1 (σc − σt) − 2 σc σt
    g = 6 J2 + 2 α I1 (σc − σt) − 2 σc σt,   α = (1 − 2ν_plas) / (1 + ν_plas)

The return map is a monolithic Newton solve on (σ, Δγ, α0, α1) and the
consistent tangent comes from the converged Jacobian.

Usage:
    from fibrehom.materials.matrix import MatrixParams, PlasticState, return_map

    params = MatrixParams.epoxy()
    response = return_map([0.02, 0, 0, 0, 0, 0], PlasticState.initial(), params)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..config import DEFAULT_LOCAL_MAX_ITERATIONS, DEFAULT_LOCAL_TOL
from ..exceptions import ParameterError, ReturnMappingError
from ..tensors import (
    DEVIATOR,
    SHEAR_DOUBLING,
    VOIGT_IDENTITY,
    invariants,
    isotropic_stiffness,
)

logger = logging.getLogger(__name__)

# ε_p : ε_p = n̂ᵀ W n̂ for strain-kind n̂
_CONTRACTION_WEIGHTS = np.array([1.0, 1.0, 1.0, 0.5, 0.5, 0.5])
_FLOW_JACOBIAN = 6.0 * SHEAR_DOUBLING[:, None] * DEVIATOR
_STRAIN_SELECTOR = np.vstack((np.eye(6), np.zeros((3, 6))))
_LINE_SEARCH_HALVINGS = 10


class HardeningLaw(str, Enum):
    """Shape of the strength evolution with the internal variables."""
    EXPONENTIAL = "exponential"  # σ0 + H (1 − e^{−n α})
    LINEAR = "linear"            # σ0 + H α


class HardeningSplit(str, Enum):
    """Which internal variable the equivalent plastic strain feeds."""
    SIGN = "sign"      # α0 when I1 >= 0, α1 otherwise
    SHARED = "shared"  # both α0 and α1


@dataclass(frozen=True)
class MatrixParams:
    """
    Matrix material constants (MPa, dimensionless).

    Attributes:
        E, nu: Young's modulus and Poisson's ratio
        nu_plas: Plastic Poisson's ratio controlling volumetric flow
        sigma_t0, sigma_c0: Initial yield strengths in tension/compression
        Ht, Hc: Hardening amplitudes
        nt, nc: Hardening rates (exponential law only)
        hardening: Exponential or linear strength evolution
        split: How the equivalent plastic strain is distributed to α0/α1
        plastic: False gives the linear-elastic matrix variant
    """
    E: float
    nu: float
    nu_plas: float
    sigma_t0: float
    sigma_c0: float
    Ht: float
    Hc: float
    nt: float
    nc: float
    hardening: HardeningLaw = HardeningLaw.EXPONENTIAL
    split: HardeningSplit = HardeningSplit.SIGN
    plastic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hardening", HardeningLaw(self.hardening))
        object.__setattr__(self, "split", HardeningSplit(self.split))
        if not self.E > 0.0:
            raise ParameterError("E", self.E, "must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ParameterError("nu", self.nu, "must satisfy 0 <= nu < 0.5")
        if not 0.0 <= self.nu_plas <= 0.5:
            raise ParameterError("nu_plas", self.nu_plas, "must satisfy 0 <= nu_plas <= 0.5")
        for name in ("sigma_t0", "sigma_c0"):
            if not getattr(self, name) > 0.0:
                raise ParameterError(name, getattr(self, name), "must be positive")
        for name in ("Ht", "Hc"):
            if not getattr(self, name) >= 0.0:
                raise ParameterError(name, getattr(self, name), "must be non-negative")
        if self.hardening is HardeningLaw.EXPONENTIAL:
            for name in ("nt", "nc"):
                if not getattr(self, name) > 0.0:
                    raise ParameterError(name, getattr(self, name), "must be positive")

    @classmethod
    def epoxy(cls, **overrides: Any) -> "MatrixParams":
        """Calibrated epoxy constants; keyword overrides replace single fields."""
        values: Dict[str, Any] = dict(
            E=3760.0, nu=0.39, nu_plas=0.3,
            sigma_t0=29.0, sigma_c0=67.0,
            Ht=67.0, Hc=58.0, nt=170.0, nc=150.0,
        )
        values.update(overrides)
        return cls(**values)

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def flow_alpha(self) -> float:
        return flow_parameter(self.nu_plas)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize to dictionary for JSON persistence."""
        return {
            "E": self.E, "nu": self.nu, "nu_plas": self.nu_plas,
            "sigma_t0": self.sigma_t0, "sigma_c0": self.sigma_c0,
            "Ht": self.Ht, "Hc": self.Hc, "nt": self.nt, "nc": self.nc,
            "hardening": self.hardening.value,
            "split": self.split.value,
            "plastic": self.plastic,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MatrixParams":
        """Deserialize from dictionary; missing constants fall back to epoxy()."""
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"type"}
        if unknown:
            raise ParameterError("matrix", sorted(unknown), "unknown keys")
        return cls.epoxy(**{k: v for k, v in d.items() if k in known})

    def __repr__(self) -> str:
        kind = "plastic" if self.plastic else "elastic"
        return (
            f"MatrixParams(E={self.E}, nu={self.nu}, st0={self.sigma_t0}, "
            f"sc0={self.sigma_c0}, {self.hardening.value}, {kind})"
        )


@dataclass(frozen=True)
class PlasticState:
    """
    History of one matrix integration point.

    Attributes:
        eps_p: Plastic strain (strain-kind Voigt)
        alpha0: Tension internal variable
        alpha1: Compression internal variable
    """
    eps_p: np.ndarray = field(default_factory=lambda: np.zeros(6))
    alpha0: float = 0.0
    alpha1: float = 0.0

    @classmethod
    def initial(cls) -> "PlasticState":
        return cls()

    @property
    def equivalent_plastic_strain(self) -> float:
        return self.alpha0 + self.alpha1


@dataclass(frozen=True)
class MaterialResponse:
    """Stress, tangent and updated history from one constitutive call."""
    sigma: np.ndarray
    tangent: np.ndarray
    state_new: PlasticState
    plastic: bool = False
    iterations: int = 0


def flow_parameter(nu_plas: float) -> float:
    """α = (1 − 2ν_plas) / (1 + ν_plas)."""
    return (1.0 - 2.0 * nu_plas) / (1.0 + nu_plas)


def yield_value(sigma: ArrayLike, sigma_t: float, sigma_c: float) -> float:
    """Paraboloidal yield function f; negative inside the elastic domain."""
    i1, j2, _ = invariants(sigma)
    return 6.0 * j2 + 2.0 * i1 * (sigma_c - sigma_t) - 2.0 * sigma_c * sigma_t


def potential_value(
    sigma: ArrayLike, sigma_t: float, sigma_c: float, nu_plas: float
) -> float:
    """Plastic potential g; equals f when σt = σc or ν_plas gives α = 1."""
    i1, j2, _ = invariants(sigma)
    alpha = flow_parameter(nu_plas)
    return 6.0 * j2 + 2.0 * alpha * i1 * (sigma_c - sigma_t) - 2.0 * sigma_c * sigma_t


def hardened_strengths(alpha0: float, alpha1: float, p: MatrixParams) -> Tuple[float, float]:
    """
    Current tensile and compressive yield strengths.

    Args:
        alpha0: Tension internal variable (>= 0)
        alpha1: Compression internal variable (>= 0)
        p: Matrix parameters

    Returns:
        (sigma_t, sigma_c)
    """
    if p.hardening is HardeningLaw.LINEAR:
        return p.sigma_t0 + p.Ht * alpha0, p.sigma_c0 + p.Hc * alpha1
    return (
        p.sigma_t0 + p.Ht * (1.0 - np.exp(-p.nt * alpha0)),
        p.sigma_c0 + p.Hc * (1.0 - np.exp(-p.nc * alpha1)),
    )


def hardening_slopes(alpha0: float, alpha1: float, p: MatrixParams) -> Tuple[float, float]:
    """(dσt/dα0, dσc/dα1)."""
    if p.hardening is HardeningLaw.LINEAR:
        return p.Ht, p.Hc
    return p.Ht * p.nt * np.exp(-p.nt * alpha0), p.Hc * p.nc * np.exp(-p.nc * alpha1)


def elastic_stiffness(p: MatrixParams) -> np.ndarray:
    """Isotropic stiffness from the Lamé constants of p."""
    return _elastic_pair(p)[0].copy()


@lru_cache(maxsize=32)
def _elastic_pair(p: MatrixParams) -> Tuple[np.ndarray, np.ndarray]:
    c = isotropic_stiffness(p.E, p.nu)
    return c, np.linalg.inv(c)


def _local_system(
    x: np.ndarray,
    eps_e_trial: np.ndarray,
    state: PlasticState,
    p: MatrixParams,
    chi: Tuple[float, float],
    compliance: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual, Jacobian and flow direction of the backward-Euler return."""
    sigma, dgamma, a0, a1 = x[:6], x[6], x[7], x[8]
    chi_t, chi_c = chi
    st, sc = hardened_strengths(a0, a1, p)
    dst, dsc = hardening_slopes(a0, a1, p)
    i1, j2, eta = invariants(sigma)
    alpha = p.flow_alpha
    f_scale = 2.0 * p.sigma_c0 * p.sigma_t0
    cq = 1.0 + 2.0 * p.nu_plas ** 2

    n_hat = SHEAR_DOUBLING * (6.0 * eta + 2.0 * alpha * (sc - st) * VOIGT_IDENTITY)
    grad_f = SHEAR_DOUBLING * (6.0 * eta + 2.0 * (sc - st) * VOIGT_IDENTITY)
    f = 6.0 * j2 + 2.0 * i1 * (sc - st) - 2.0 * sc * st

    weighted = _CONTRACTION_WEIGHTS * n_hat
    q = np.sqrt(max(float(n_hat @ weighted), 0.0) / cq)
    dq_dn = weighted / (cq * q) if q > 0.0 else np.zeros(6)

    dn_da0 = VOIGT_IDENTITY * (-2.0 * alpha * dst)
    dn_da1 = VOIGT_IDENTITY * (2.0 * alpha * dsc)
    dq_dsigma = dq_dn @ _FLOW_JACOBIAN
    dq_da0 = float(dq_dn @ dn_da0)
    dq_da1 = float(dq_dn @ dn_da1)

    r = np.empty(9)
    r[:6] = compliance @ sigma - eps_e_trial + dgamma * n_hat
    r[6] = f / f_scale
    r[7] = a0 - state.alpha0 - chi_t * dgamma * q
    r[8] = a1 - state.alpha1 - chi_c * dgamma * q

    jac = np.zeros((9, 9))
    jac[:6, :6] = compliance + dgamma * _FLOW_JACOBIAN
    jac[:6, 6] = n_hat
    jac[:6, 7] = dgamma * dn_da0
    jac[:6, 8] = dgamma * dn_da1
    jac[6, :6] = grad_f / f_scale
    jac[6, 7] = -2.0 * dst * (i1 + sc) / f_scale
    jac[6, 8] = 2.0 * dsc * (i1 - st) / f_scale
    for row, c in ((7, chi_t), (8, chi_c)):
        jac[row, :6] = -c * dgamma * dq_dsigma
        jac[row, 6] = -c * q
        jac[row, 7] = -c * dgamma * dq_da0
        jac[row, 8] = -c * dgamma * dq_da1
    jac[7, 7] += 1.0
    jac[8, 8] += 1.0
    return r, jac, n_hat


def _scaled_error(r: np.ndarray, p: MatrixParams) -> float:
    return max(
        float(np.max(np.abs(r[:6]))) * p.E / p.sigma_t0,
        abs(r[6]),
        abs(r[7]),
        abs(r[8]),
    )


def _solve_return(
    eps_e_trial: np.ndarray,
    sigma_trial: np.ndarray,
    state: PlasticState,
    p: MatrixParams,
    chi: Tuple[float, float],
    tol: float,
    max_iterations: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    compliance = _elastic_pair(p)[1]
    x = np.concatenate((sigma_trial, [0.0, state.alpha0, state.alpha1]))
    r, jac, n_hat = _local_system(x, eps_e_trial, state, p, chi, compliance)
    err = _scaled_error(r, p)
    polished = False

    for iteration in range(1, max_iterations + 1):
        if err <= tol:
            # one extra correction pushes the residual to round-off
            if polished or err <= tol * 1e-6:
                return x, jac, n_hat, iteration
            polished = True
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise ReturnMappingError(err, iteration)

        merit = float(r @ r)
        scale = 1.0
        for _ in range(_LINE_SEARCH_HALVINGS):
            trial = x + scale * step
            r_new, jac_new, n_new = _local_system(trial, eps_e_trial, state, p, chi, compliance)
            if float(r_new @ r_new) <= merit or not np.isfinite(merit):
                break
            scale *= 0.5
        x, r, jac, n_hat = trial, r_new, jac_new, n_new
        err = _scaled_error(r, p)
        if not np.isfinite(err):
            raise ReturnMappingError(float("nan"), iteration)

    if err <= tol:
        return x, jac, n_hat, max_iterations
    raise ReturnMappingError(err, max_iterations)


def return_map(
    eps_total: ArrayLike,
    state: PlasticState,
    p: MatrixParams,
    tol: float = DEFAULT_LOCAL_TOL,
    max_iterations: int = DEFAULT_LOCAL_MAX_ITERATIONS,
) -> MaterialResponse:
    """
    Backward-Euler stress update with consistent tangent.

    Args:
        eps_total: Total strain (strain-kind Voigt)
        state: Converged history from the previous load step
        p: Matrix parameters
        tol: Relative tolerance for the elastic check and local Newton
        max_iterations: Local Newton iteration cap

    Returns:
        MaterialResponse with stress, tangent and new state

    Raises:
        ReturnMappingError: If the local Newton solve does not converge
    """
    eps = np.asarray(eps_total, dtype=float).reshape(6)
    c_el = _elastic_pair(p)[0]
    eps_e_trial = eps - state.eps_p
    sigma_trial = c_el @ eps_e_trial

    if not p.plastic:
        return MaterialResponse(sigma_trial, c_el.copy(), state)

    st, sc = hardened_strengths(state.alpha0, state.alpha1, p)
    if yield_value(sigma_trial, st, sc) <= tol * p.sigma_t0 ** 2:
        return MaterialResponse(sigma_trial, c_el.copy(), state)

    if p.split is HardeningSplit.SHARED:
        branches: List[Tuple[float, float]] = [(1.0, 1.0)]
    elif sigma_trial[:3].sum() >= 0.0:
        branches = [(1.0, 0.0), (0.0, 1.0)]
    else:
        branches = [(0.0, 1.0), (1.0, 0.0)]

    solution = None
    for chi in branches:
        x, jac, n_hat, iterations = _solve_return(
            eps_e_trial, sigma_trial, state, p, chi, tol, max_iterations
        )
        if solution is None:
            solution = (x, jac, n_hat, iterations)
        if p.split is HardeningSplit.SHARED:
            break
        tension = x[:3].sum() >= 0.0
        if tension == (chi[0] == 1.0):
            solution = (x, jac, n_hat, iterations)
            break
        logger.debug("I1 sign flipped during return; retrying opposite branch")

    x, jac, n_hat, iterations = solution
    dgamma = x[6]
    if dgamma < -tol:
        raise ReturnMappingError(abs(dgamma), iterations)
    tangent = np.linalg.solve(jac, _STRAIN_SELECTOR)[:6]
    state_new = PlasticState(
        eps_p=state.eps_p + dgamma * n_hat,
        alpha0=max(float(x[7]), state.alpha0),
        alpha1=max(float(x[8]), state.alpha1),
    )
    return MaterialResponse(x[:6].copy(), tangent, state_new, True, iterations)


def consistent_tangent_check(
    op: Callable[[np.ndarray], MaterialResponse],
    probe: ArrayLike,
    perturbation: float = 1e-7,
) -> float:
    """
    Compare the returned tangent with central finite differences.

    Args:
        op: Strain -> MaterialResponse, history held fixed
        probe: Strain at which to compare
        perturbation: Finite-difference step

    Returns:
        max |C − C_fd| / max |C| over the 36 entries
    """
    e0 = np.asarray(probe, dtype=float).reshape(6)
    tangent = op(e0).tangent
    fd = np.empty((6, 6))
    for j in range(6):
        step = np.zeros(6)
        step[j] = perturbation
        fd[:, j] = (op(e0 + step).sigma - op(e0 - step).sigma) / (2.0 * perturbation)
    return float(np.max(np.abs(tangent - fd)) / np.max(np.abs(tangent)))


# Material-point driver

@dataclass
class PointHistory:
    """Strain, stress and internal-variable history of a driven point."""
    strain: np.ndarray
    stress: np.ndarray
    alpha: np.ndarray
    states: List[PlasticState]

    def to_rows(self) -> List[List[float]]:
        return [
            [i, *self.strain[i], *self.stress[i]] for i in range(len(self.strain))
        ]


POINT_PRESETS: Dict[str, Tuple[int, float]] = {
    "tension": (0, 1.0),
    "compression": (0, -1.0),
    "shear": (3, 1.0),
}


def preset_program(name: str, magnitude: float, steps: int) -> Tuple[np.ndarray, Tuple[int]]:
    """
    Controlled-strain targets for a named calibration load case.

    Args:
        name: tension, compression or shear
        magnitude: Final strain magnitude (engineering for shear)
        steps: Number of equal increments

    Returns:
        (targets of shape (steps, 1), controlled component tuple)
    """
    if name not in POINT_PRESETS:
        raise ParameterError("preset", name, f"expected one of {sorted(POINT_PRESETS)}")
    if steps < 1:
        raise ParameterError("steps", steps, "must be at least 1")
    component, sign = POINT_PRESETS[name]
    targets = sign * abs(magnitude) * np.arange(1, steps + 1) / steps
    return targets.reshape(-1, 1), (component,)


def drive_material_point(
    p: MatrixParams,
    targets: ArrayLike,
    controlled: Sequence[int] = (0,),
    state: Optional[PlasticState] = None,
    stress_tol: float = 1e-10,
    max_iterations: int = 25,
    tol: float = DEFAULT_LOCAL_TOL,
) -> PointHistory:
    """
    Drive one material point under mixed strain/stress control.

    Controlled strain components follow targets; all other stress
    components are held at zero.

    Args:
        p: Matrix parameters
        targets: (steps, len(controlled)) total strains of controlled slots
        controlled: Strain components that are prescribed
        state: Starting history (virgin if None)
        stress_tol: Zero-stress tolerance relative to sigma_t0
        max_iterations: Newton cap for the free components per step
        tol: Local return-map tolerance

    Returns:
        PointHistory including the unloaded initial row
    """
    path = np.asarray(targets, dtype=float).reshape(-1, len(controlled))
    ctrl = list(controlled)
    free = [i for i in range(6) if i not in ctrl]
    state = state or PlasticState.initial()

    eps = np.zeros(6)
    strains = [eps.copy()]
    stresses = [np.zeros(6)]
    alphas = [[state.alpha0, state.alpha1]]
    states = [state]

    for step, target in enumerate(path, start=1):
        eps[ctrl] = target
        for _ in range(max_iterations):
            response = return_map(eps, state, p, tol)
            residual = response.sigma[free]
            if not free or np.max(np.abs(residual)) <= stress_tol * p.sigma_t0:
                break
            tangent = response.tangent[np.ix_(free, free)]
            eps[free] -= np.linalg.solve(tangent, residual)
        else:
            raise ReturnMappingError(float(np.max(np.abs(residual))), max_iterations)
        state = response.state_new
        strains.append(eps.copy())
        stresses.append(response.sigma.copy())
        alphas.append([state.alpha0, state.alpha1])
        states.append(state)
        logger.debug("point step %d: sigma=%s", step, np.round(response.sigma, 6))

    return PointHistory(
        strain=np.array(strains),
        stress=np.array(stresses),
        alpha=np.array(alphas),
        states=states,
    )
