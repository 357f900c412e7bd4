"""Entropy-dimension curves, local dimension, saturation/concentration predicates and satdim."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .entropy import (
    LineDirection,
    LinePartition,
    as_direction,
    direction_grid,
    entropy,
    iter_components,
    line_coordinate,
    max_window_mass,
)
from .ifs import min_pairwise_distance
from .measure import DiscreteMeasure


@dataclass(frozen=True)
class Subspace:
    """{0}, a line through the origin, or the whole plane."""

    dim: int
    line: LineDirection | None = None

    def __post_init__(self):
        if self.dim not in (0, 1, 2):
            raise ValueError("subspace dimension must be 0, 1 or 2")
        if (self.dim == 1) != (self.line is not None):
            raise ValueError("a line subspace needs a direction (and only it)")

    @classmethod
    def of(cls, v) -> "Subspace":
        if isinstance(v, Subspace):
            return v
        if isinstance(v, str):
            return {"zero": ZERO, "plane": PLANE}[v]
        return cls(1, as_direction(v))


ZERO = Subspace(0)
PLANE = Subspace(2)


@dataclass(frozen=True)
class SaturationQuery:
    v: Subspace
    eps: float
    m: int

    def __post_init__(self):
        object.__setattr__(self, "v", Subspace.of(self.v))
        if not 0 < self.eps <= 2:
            raise ValueError("eps must lie in (0, 2]")
        if self.m < 1:
            raise ValueError("scale m must be at least 1")


@dataclass
class DimensionReport:
    levels: list
    entropies: list
    slope: float
    intercept: float
    trusted: list
    resolution_level: float
    local_samples: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "levels": self.levels,
            "normalized_entropies": self.entropies,
            "slope": self.slope,
            "trusted": self.trusted,
            "resolution_level": self.resolution_level,
        }

    def to_csv(self) -> str:
        rows = ["level,entropy,trusted"]
        rows += [f"{n},{h!r},{int(t)}" for n, h, t in zip(self.levels, self.entropies, self.trusted)]
        return "\n".join(rows) + "\n"


def resolution_level(mu: DiscreteMeasure) -> float:
    """log2(1/min atom spacing): levels beyond it only see the atoms, not the measure."""
    d = min_pairwise_distance(mu.atoms)
    return math.inf if not math.isfinite(d) or d <= 0 else math.log2(1.0 / d)


def entropy_dimension_curve(mu: DiscreteMeasure, levels: Sequence[int]) -> DimensionReport:
    """H_n = H(mu, D_n)/n per level; slope of H(mu, D_n) against n over the trusted window."""
    levels = [int(n) for n in levels]
    if any(n < 1 for n in levels) or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be positive and strictly increasing")
    raw = [entropy(mu, n) for n in levels]
    cut = resolution_level(mu)
    trusted = [n <= cut + 1e-9 for n in levels]
    xs = [n for n, t in zip(levels, trusted) if t]
    ys = [h for h, t in zip(raw, trusted) if t]
    if len(xs) >= 2:
        slope, icpt = np.polyfit(xs, ys, 1)
    else:
        slope, icpt = 0.0, 0.0
    return DimensionReport(levels, [h / n for h, n in zip(raw, levels)], float(slope), float(icpt), trusted, cut)


def ball_masses(mu: DiscreteMeasure, points: np.ndarray, radii: Sequence[float]) -> np.ndarray:
    """mu(closed ball B(x, r)) for each point (rows) and radius (columns)."""
    xy = np.column_stack([mu.atoms.real, mu.atoms.imag])
    tree = cKDTree(xy)
    probs = mu.probabilities
    pxy = np.column_stack([np.real(points), np.imag(points)])
    out = np.zeros((len(points), len(radii)))
    for j, r in enumerate(radii):
        hits = tree.query_ball_point(pxy, r)
        out[:, j] = [probs[h].sum() for h in hits]
    return out


def local_dimension_samples(mu: DiscreteMeasure, radii: Sequence[float], sample_count: int, seed: int,
                            drop_floor_decade: bool = False) -> list[tuple[complex, float]]:
    """(x, slope of log mu(B(x,r)) vs log r) for mu-distributed sample points x."""
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii[-1] / radii[0] < 100:
        raise ValueError("radii must span at least two decades")
    if drop_floor_decade:
        radii = radii[radii >= 10 * radii[0]]
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(mu), size=sample_count, p=mu.probabilities)
    pts = mu.atoms[idx]
    masses = ball_masses(mu, pts, radii)
    lr = np.log(radii)
    out = []
    for x, row in zip(pts, masses):
        slope = np.polyfit(lr, np.log(row), 1)[0]
        out.append((complex(x), float(slope)))
    return out


def _line_entropy(mu: DiscreteMeasure, w: LineDirection, m: int) -> float:
    return entropy(mu, LinePartition(m, w))


def saturation_margin(mu: DiscreteMeasure, query: SaturationQuery) -> float:
    """H_m(mu) - H_m(pi_{V_perp} mu) - dim V + eps."""
    v, m, eps = query.v, query.m, query.eps
    hm = entropy(mu, m) / m
    if v.dim == 0:
        proj = hm
    elif v.dim == 2:
        proj = 0.0
    else:
        proj = _line_entropy(mu, v.line.perp, m) / m
    return hm - proj - v.dim + eps


def is_saturated(mu: DiscreteMeasure, query: SaturationQuery) -> tuple[bool, float]:
    margin = saturation_margin(mu, query)
    return margin >= -1e-12, margin


def is_concentrated(mu: DiscreteMeasure, v, eps: float, jitter: int = 32, seed: int = 0) -> bool:
    """Is there a translate W of V with mu(W^(eps)) >= 1 - eps (open eps-neighbourhood)?

    Tubes: the sliding window over the normal coordinate is exact. Balls: centres at
    every atom plus `jitter` seeded offsets around the heaviest atom.
    """
    v = Subspace.of(v)
    probs = mu.probabilities
    if v.dim == 2:
        return True
    if v.dim == 1:
        coords = line_coordinate(mu.atoms, v.line.perp)
        return max_window_mass(coords, probs, 2.0 * eps) >= 1.0 - eps - 1e-12
    xy = np.column_stack([mu.atoms.real, mu.atoms.imag])
    tree = cKDTree(xy)
    rng = np.random.default_rng(seed)
    heavy = xy[int(np.argmax(probs))]
    ang = rng.uniform(0, 2 * np.pi, jitter)
    rad = eps * np.sqrt(rng.uniform(0, 1, jitter))
    centres = np.vstack([xy, heavy + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])])
    r_open = np.nextafter(eps, 0.0)
    best = max(probs[h].sum() for h in tree.query_ball_point(centres, r_open))
    return best >= 1.0 - eps - 1e-12


def default_direction_count(m: int) -> int:
    return int(min(4096, max(180, math.ceil(math.pi * 2**m))))


@dataclass
class SatdimReport:
    satdim: int
    plane_fraction: float
    best_line_fraction: float
    best_line: float | None
    directions: int
    components: int

    def as_dict(self) -> dict:
        return self.__dict__.copy()


def satdim_report(mu: DiscreteMeasure, eps: float, m: int, k: int, direction_grid_size: int | None = None) -> SatdimReport:
    """Largest dim V with P_{i=k}(mu^{x,i} is (V, eps, m)-saturated) >= 1 - eps."""
    ndir = default_direction_count(m) if direction_grid_size is None else int(direction_grid_size)
    comps = [(float(w), c) for _, w, c in iter_components(mu, k, rescaled=True)]
    plane_q = SaturationQuery(PLANE, eps, m)
    plane_frac = sum(w for w, c in comps if is_saturated(c, plane_q)[0])
    if plane_frac >= 1 - eps - 1e-12:
        return SatdimReport(2, plane_frac, plane_frac, None, ndir, len(comps))
    best, best_w = 0.0, None
    for w in direction_grid(ndir):
        q = SaturationQuery(Subspace(1, w), eps, m)
        frac = sum(cw for cw, c in comps if is_saturated(c, q)[0])
        if frac > best:
            best, best_w = frac, w.angle
        if frac >= 1 - eps - 1e-12:
            return SatdimReport(1, plane_frac, frac, w.angle, ndir, len(comps))
    return SatdimReport(0, plane_frac, best, best_w, ndir, len(comps))


def satdim_estimate(mu: DiscreteMeasure, eps: float, m: int, k: int, direction_grid_size: int | None = None) -> int:
    return satdim_report(mu, eps, m, k, direction_grid_size).satdim
