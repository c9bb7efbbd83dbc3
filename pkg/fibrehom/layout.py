"""
Fibrehom Fibre Layout

Random periodic fibre placement for UD cross-sections: random sequential
insertion with periodic wrap until it jams, then stirring. Every missing
fibre is dropped into the largest sampled void and the overlaps it
causes are relaxed by pairwise repulsion until all fibres keep their
minimum distance again.

Usage:
    from fibrehom.layout import GenParams, generate_layout

    layout = generate_layout(GenParams(radius=0.0025, target_vf=0.6, seed=3), (0.05, 0.05))
    print(layout.volume_fraction, len(layout.centres))
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import LayoutError, ParameterError

logger = logging.getLogger(__name__)

JAMMING_GUARD = 0.82
INSERTION_TRIES = 300
VOID_SAMPLES = 400
RELAX_SWEEPS = 5000
RELAX_OVERSHOOT = 1e-6
RELAX_JITTER = 0.02
RELAX_KICK_EVERY = 50
PROJECTION_MARGIN = 1e-6
DEFAULT_CLEARANCE_RATIO = 0.15

AXES = ("x", "y")


@dataclass(frozen=True)
class GenParams:
    """
    Fibre generator settings.

    Attributes:
        radius: Fibre radius (mm)
        target_vf: Target fibre volume fraction
        min_gap: Minimum surface-to-surface distance between fibres (mm)
        seed: Random seed
        max_attempts: Cap on insertion attempts over the whole run
        vf_tol: Accepted |vf - target_vf|
        boundary_clearance: Band around each cell side that fibre
            outlines must avoid; defaults to 0.15 r
        wall_axes: Axes whose sides no fibre may cross
    """
    radius: float
    target_vf: float
    min_gap: float = 0.0
    seed: int = 0
    max_attempts: int = 200_000
    vf_tol: float = 0.01
    boundary_clearance: Optional[float] = None
    wall_axes: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "wall_axes", tuple(str(a).lower() for a in self.wall_axes))
        if not self.radius > 0.0:
            raise ParameterError("radius", self.radius, "must be positive")
        if not 0.0 <= self.target_vf < JAMMING_GUARD:
            raise ParameterError("target_vf", self.target_vf, f"must lie in [0, {JAMMING_GUARD})")
        if self.min_gap < 0.0:
            raise ParameterError("min_gap", self.min_gap, "must be non-negative")
        if self.max_attempts < 1:
            raise ParameterError("max_attempts", self.max_attempts, "must be positive")
        if self.boundary_clearance is not None and self.boundary_clearance < 0.0:
            raise ParameterError("boundary_clearance", self.boundary_clearance, "must be non-negative")
        bad = [a for a in self.wall_axes if a not in AXES]
        if bad:
            raise ParameterError("wall_axes", self.wall_axes, "entries must be 'x' or 'y'")

    @property
    def clearance(self) -> float:
        if self.boundary_clearance is None:
            return DEFAULT_CLEARANCE_RATIO * self.radius
        return self.boundary_clearance

    @property
    def min_distance(self) -> float:
        """Smallest admissible centre-to-centre distance."""
        return 2.0 * self.radius + self.min_gap

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "target_vf": self.target_vf,
            "min_gap": self.min_gap,
            "seed": self.seed,
            "max_attempts": self.max_attempts,
            "vf_tol": self.vf_tol,
            "boundary_clearance": self.boundary_clearance,
            "wall_axes": list(self.wall_axes),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "GenParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ParameterError("generator", sorted(unknown), "unknown keys")
        values = dict(d)
        if "wall_axes" in values:
            values["wall_axes"] = tuple(values["wall_axes"])
        return cls(**values)


@dataclass(frozen=True)
class FibreImage:
    """One periodic copy of a fibre that intersects the cell."""
    x: float
    y: float
    r: float
    fibre: int


@dataclass
class FibreLayout:
    """
    Fibre centres in a periodic rectangular cell.

    Attributes:
        cell: (Lx, Ly) in mm
        centres: (n, 2) centres wrapped into the cell
        radius: Common fibre radius (mm)
        wall_axes: Axes no fibre crosses
    """
    cell: Tuple[float, float]
    centres: np.ndarray
    radius: float
    wall_axes: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.cell = (float(self.cell[0]), float(self.cell[1]))
        self.centres = np.asarray(self.centres, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.centres)

    @property
    def area(self) -> float:
        return self.cell[0] * self.cell[1]

    @property
    def volume_fraction(self) -> float:
        return len(self.centres) * math.pi * self.radius ** 2 / self.area

    def images(self) -> List[FibreImage]:
        """All periodic copies whose disc overlaps the cell."""
        lx, ly = self.cell
        r = self.radius
        out = []
        for i, (x, y) in enumerate(self.centres):
            for dx in (-lx, 0.0, lx):
                for dy in (-ly, 0.0, ly):
                    cx, cy = x + dx, y + dy
                    if -r < cx < lx + r and -r < cy < ly + r:
                        out.append(FibreImage(cx, cy, r, i))
        return out

    def nearest_distances(self) -> np.ndarray:
        """Periodic nearest-neighbour centre distance of every fibre."""
        if len(self.centres) < 2:
            return np.full(len(self.centres), np.inf)
        d = _periodic_delta(
            self.centres[:, None, :] - self.centres[None, :, :], self.cell, self.wall_axes
        )
        dist = np.linalg.norm(d, axis=2)
        np.fill_diagonal(dist, np.inf)
        return dist.min(axis=1)

    def to_csv(self) -> str:
        """Images as CSV rows x, y, r for plotting."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "r"])
        for img in self.images():
            writer.writerow([repr(img.x), repr(img.y), repr(img.r)])
        return buf.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cell": list(self.cell),
            "radius": self.radius,
            "wall_axes": list(self.wall_axes),
            "centres": self.centres.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "FibreLayout":
        return cls(
            cell=tuple(d["cell"]),
            centres=np.asarray(d.get("centres", []), dtype=float),
            radius=float(d["radius"]),
            wall_axes=tuple(d.get("wall_axes", ())),
        )

    def __repr__(self) -> str:
        return (
            f"FibreLayout(cell={self.cell}, fibres={len(self)}, "
            f"vf={self.volume_fraction:.4f})"
        )


def _periodic_delta(d: np.ndarray, cell: Sequence[float], wall_axes: Sequence[str] = ()) -> np.ndarray:
    """Minimum-image separation; wall axes keep the plain difference."""
    size = np.asarray(cell, dtype=float)
    shift = size * np.round(d / size)
    for axis, name in enumerate(AXES):
        if name in wall_axes:
            shift[..., axis] = 0.0
    return d - shift


def _boundary_ok(c: np.ndarray, p: GenParams, cell: Sequence[float]) -> bool:
    """Fibre outline keeps clear of every side and corner of the cell."""
    r, clear = p.radius, p.clearance
    crossing = []
    for axis, name in enumerate(AXES):
        d = min(c[axis], cell[axis] - c[axis])
        if name in p.wall_axes:
            if d < r + clear:
                return False
        elif r - clear < d < r + clear:
            return False
        crossing.append(d < r)
    if all(crossing):
        corner = np.array([min(c[0], cell[0] - c[0]), min(c[1], cell[1] - c[1])])
        if np.linalg.norm(corner) < r + clear:
            return False
    return True


def _clear_of(c: np.ndarray, others: np.ndarray, p: GenParams, cell: Sequence[float]) -> bool:
    if len(others) == 0:
        return True
    d = _periodic_delta(others - c, cell, p.wall_axes)
    return bool(np.min(np.einsum("ij,ij->i", d, d)) >= p.min_distance ** 2)


def _wrap(centres: np.ndarray, p: GenParams, cell: Sequence[float]) -> np.ndarray:
    out = centres.copy()
    for axis, name in enumerate(AXES):
        if name not in p.wall_axes:
            out[..., axis] %= cell[axis]
            # a tiny negative coordinate wraps onto the far side exactly
            out[..., axis] = np.where(out[..., axis] >= cell[axis], 0.0, out[..., axis])
    return out


def _project(centres: np.ndarray, p: GenParams, cell: Sequence[float]) -> np.ndarray:
    """
    Move every centre out of the forbidden side bands and corner discs.

    Centres inside a band go to its nearer edge; walls clamp the centre
    into the interior strip.
    """
    r, clear = p.radius, p.clearance
    margin = PROJECTION_MARGIN * r
    size = np.asarray(cell, dtype=float)
    out = centres.copy()
    for axis, name in enumerate(AXES):
        x = out[:, axis]
        length = size[axis]
        if name in p.wall_axes:
            out[:, axis] = np.clip(x, r + clear + margin, length - r - clear - margin)
            continue
        near_origin = x < length - x
        d = np.where(near_origin, x, length - x)
        band = (d > r - clear) & (d < r + clear)
        inner = r - clear - margin
        d_new = np.where((d < r) & (inner > 0.0), inner, r + clear + margin)
        d = np.where(band, d_new, d)
        out[:, axis] = np.where(near_origin, d, length - d)

    near_origin = out < size - out
    side = np.where(near_origin, out, size - out)
    bad = np.all(side < r, axis=1) & (np.linalg.norm(side, axis=1) < r + clear)
    for i in np.flatnonzero(bad):
        # leave the corner across the side it is closest to clearing
        axis = int(np.argmax(side[i]))
        d = r + clear + margin
        out[i, axis] = d if near_origin[i, axis] else size[axis] - d
    return out


def _overlaps(centres: np.ndarray, p: GenParams, cell: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Pairwise min-image separations (i minus j) and distances, diagonal infinite."""
    d = _periodic_delta(centres[:, None, :] - centres[None, :, :], cell, p.wall_axes)
    dist = np.linalg.norm(d, axis=2)
    np.fill_diagonal(dist, np.inf)
    return d, dist


def _relax(
    centres: np.ndarray,
    p: GenParams,
    cell: Sequence[float],
    rng: np.random.Generator,
    max_sweeps: int,
) -> Tuple[np.ndarray, int, bool]:
    """
    Push overlapping fibres apart until every pair keeps min_distance.

    Each sweep moves both fibres of a short pair half the shortfall along
    their separation, then wraps and projects out of the side bands.
    Returns:
        (centres, sweeps used, success)
    """
    target = p.min_distance * (1.0 + RELAX_OVERSHOOT)
    jitter = RELAX_JITTER * p.radius
    for sweep in range(1, max_sweeps + 1):
        d, dist = _overlaps(centres, p, cell)
        if dist.min() >= p.min_distance and all(_boundary_ok(c, p, cell) for c in centres):
            return centres, sweep - 1, True
        short = np.clip(target - dist, 0.0, None)
        safe = np.where(np.isfinite(dist) & (dist > 0.0), dist, 1.0)
        push = 0.5 * np.einsum("ij,ijk->ik", short / safe, d)
        if sweep % RELAX_KICK_EVERY == 0:
            push += rng.normal(0.0, jitter, centres.shape)
        centres = _project(_wrap(centres + push, p, cell), p, cell)
    return centres, max_sweeps, False


def _void_centre(centres: np.ndarray, p: GenParams, cell: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Admissible sample point farthest from every existing fibre."""
    samples = _project(rng.uniform(0.0, 1.0, (VOID_SAMPLES, 2)) * np.asarray(cell), p, cell)
    if len(centres) == 0:
        return samples[0]
    d = _periodic_delta(samples[:, None, :] - centres[None, :, :], cell, p.wall_axes)
    clearance = np.linalg.norm(d, axis=2).min(axis=1)
    return samples[int(np.argmax(clearance))]


def target_count(p: GenParams, cell: Sequence[float]) -> int:
    """Number of fibres whose area best matches target_vf."""
    return int(round(p.target_vf * cell[0] * cell[1] / (math.pi * p.radius ** 2)))


def generate_layout(p: GenParams, cell: Sequence[float]) -> FibreLayout:
    """
    Random periodic layout reaching target_vf.

    Random sequential insertion runs until it jams. Each remaining fibre
    then goes into the largest void found by sampling and a stirring
    pass relaxes the resulting overlaps.

    Args:
        p: Generator settings
        cell: (Lx, Ly) in mm

    Returns:
        FibreLayout, identical for identical inputs

    Raises:
        LayoutError: If the fibre count cannot match target_vf within
            vf_tol or the attempt budget runs out
    """
    lx, ly = float(cell[0]), float(cell[1])
    size = (lx, ly)
    if min(lx, ly) <= 2.0 * (p.radius + p.clearance):
        raise ParameterError("cell", size, "must exceed one fibre diameter plus clearance")
    n_target = target_count(p, size)
    reachable = n_target * math.pi * p.radius ** 2 / (lx * ly)
    if abs(reachable - p.target_vf) > p.vf_tol:
        raise LayoutError(reachable, p.target_vf, "fibre radius too coarse for the cell")

    def shortfall(reason: str) -> LayoutError:
        achieved = len(centres) * math.pi * p.radius ** 2 / (lx * ly)
        return LayoutError(achieved, p.target_vf, f"{reason} with {len(centres)}/{n_target} fibres")

    rng = np.random.default_rng(p.seed)
    centres = np.zeros((0, 2))
    attempts = 0
    misses = 0
    while len(centres) < n_target and misses < INSERTION_TRIES:
        attempts += 1
        if attempts > p.max_attempts:
            raise shortfall(f"attempt budget of {p.max_attempts} exhausted")
        c = rng.uniform(0.0, 1.0, 2) * size
        if _boundary_ok(c, p, size) and _clear_of(c, centres, p, size):
            centres = np.vstack((centres, c))
            misses = 0
        else:
            misses += 1
    inserted = len(centres)

    stirs = 0
    while len(centres) < n_target:
        trial = np.vstack((centres, _void_centre(centres, p, size, rng)))
        budget = min(RELAX_SWEEPS, p.max_attempts - attempts)
        if budget < 1:
            raise shortfall(f"attempt budget of {p.max_attempts} exhausted")
        trial, sweeps, ok = _relax(trial, p, size, rng, budget)
        attempts += max(sweeps, 1)
        stirs += sweeps
        if not ok:
            if attempts >= p.max_attempts:
                raise shortfall(f"attempt budget of {p.max_attempts} exhausted")
            raise shortfall("stirring could not separate the fibres")
        centres = trial

    layout = FibreLayout(size, centres, p.radius, p.wall_axes)
    logger.info(
        "Generated %d fibres (vf=%.4f): %d by insertion, %d by stirring over %d sweeps",
        len(layout), layout.volume_fraction, inserted, len(layout) - inserted, stirs,
    )
    return layout
