"""Dyadic partitions, entropy, components, projections and convolution of atomic measures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np

from .ifs import DEFAULT_BUDGET, BudgetError
from .measure import (
    MAX_LEVEL,
    DiscreteMeasure,
    EmptyComponentError,
    group_sums,
    outer_weights,
    sort_groups,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class PartitionError(ValueError):
    pass


def check_level(n: int) -> int:
    n = int(n)
    if not 0 <= n <= MAX_LEVEL:
        raise PartitionError(f"dyadic level {n} outside [0, {MAX_LEVEL}]")
    return n


def unit_vector(angle: float) -> tuple[float, float]:
    """(cos, sin) with values within 1e-15 of 0 or +-1 snapped, so axis directions are exact."""
    c, s = math.cos(angle), math.sin(angle)
    c = 0.0 if abs(c) < 1e-15 else (math.copysign(1.0, c) if abs(abs(c) - 1) < 1e-15 else c)
    s = 0.0 if abs(s) < 1e-15 else (math.copysign(1.0, s) if abs(abs(s) - 1) < 1e-15 else s)
    return c, s


@dataclass(frozen=True)
class LineDirection:
    """A line through the origin, stored by its angle in [0, pi)."""

    angle: float

    def __post_init__(self):
        a = math.fmod(float(self.angle), math.pi)
        if a < 0:
            a += math.pi
        if math.pi - a < 1e-15:
            a = 0.0
        object.__setattr__(self, "angle", a)

    @property
    def unit(self) -> complex:
        c, s = unit_vector(self.angle)
        return complex(c, s)

    @property
    def perp(self) -> "LineDirection":
        return LineDirection(self.angle + math.pi / 2)


X_AXIS = LineDirection(0.0)
Y_AXIS = LineDirection(math.pi / 2)


def as_direction(w) -> LineDirection:
    return w if isinstance(w, LineDirection) else LineDirection(float(w))


def line_coordinate(atoms: np.ndarray, w) -> np.ndarray:
    """<z, unit(w)> for each atom."""
    c, s = unit_vector(as_direction(w).angle)
    return atoms.real * c + atoms.imag * s


def direction_grid(count: int, golden_offset: bool = False) -> list[LineDirection]:
    off = GOLDEN if golden_offset else 0.0
    return [LineDirection(math.pi * (i + off) / count) for i in range(count)]


# partitions ---------------------------------------------------------------

@dataclass(frozen=True)
class Dyadic:
    """D_n: half-open squares of side 2^-n."""

    n: int

    def labels(self, atoms: np.ndarray) -> list[np.ndarray]:
        if self.n > MAX_LEVEL:
            return _atom_cells(atoms, self.n)
        s = 2.0 ** check_level(self.n)
        return [np.floor(atoms.real * s).astype(np.int64), np.floor(atoms.imag * s).astype(np.int64)]


def _atom_cells(atoms: np.ndarray, n: int) -> list[np.ndarray]:
    """Levels past MAX_LEVEL: once every atom has its own level-MAX_LEVEL cell, every finer
    dyadic partition separates the atoms in the same way, so the atom index is the cell."""
    cells = Dyadic(MAX_LEVEL).labels(atoms)
    if np.unique(np.column_stack(cells), axis=0).shape[0] != atoms.size:
        raise PartitionError(f"dyadic level {n} needs atoms separated at level {MAX_LEVEL}")
    return [np.arange(atoms.size, dtype=np.int64)]


@dataclass(frozen=True)
class LinePartition:
    """D_n^W: preimages under pi_W of the level-n dyadic intervals of the line W."""

    n: int
    w: LineDirection

    def labels(self, atoms: np.ndarray) -> list[np.ndarray]:
        s = 2.0 ** check_level(self.n)
        return [np.floor(line_coordinate(atoms, self.w) * s).astype(np.int64)]


@dataclass(frozen=True)
class JoinPartition:
    """D_n^{W + W_perp}: the dyadic grid rotated to the frame (W, W_perp)."""

    n: int
    w: LineDirection

    def labels(self, atoms: np.ndarray) -> list[np.ndarray]:
        return LinePartition(self.n, self.w).labels(atoms) + LinePartition(self.n, self.w.perp).labels(atoms)


Partition = Union[Dyadic, LinePartition, JoinPartition]


def as_partition(spec) -> Partition:
    if isinstance(spec, (Dyadic, LinePartition, JoinPartition)):
        return spec
    return Dyadic(int(spec))


def cell_masses(mu: DiscreteMeasure, cols: Sequence[np.ndarray]) -> np.ndarray:
    """Exact numerators of the cells hit by atoms (denominator mu.denominator)."""
    order, starts = sort_groups(list(cols))
    return group_sums(mu.numerators[order], starts)


def _entropy_from_numerators(sums: np.ndarray, denom: int) -> float:
    if sums.dtype == object or denom >= 2**53:
        p = np.array([int(v) / denom for v in sums.tolist()])
    else:
        p = sums.astype(float) / float(denom)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def entropy(mu: DiscreteMeasure, level) -> float:
    """H(mu, P) in bits; P is a dyadic level or another partition spec."""
    part = as_partition(level)
    return _entropy_from_numerators(cell_masses(mu, part.labels(mu.atoms)), mu.denominator)


def normalized_entropy(mu: DiscreteMeasure, n: int) -> float:
    """H_n(mu) = H(mu, D_n)/n."""
    if n < 1:
        raise PartitionError("normalized entropy needs n >= 1")
    return entropy(mu, n) / n


def _level(spec: Partition) -> int:
    return spec.n


def conditional_entropy(mu: DiscreteMeasure, fine, coarse) -> float:
    """H(mu, E | F) = sum_F mu(F) H(mu_F, E)."""
    fine, coarse = as_partition(fine), as_partition(coarse)
    if _level(fine) < _level(coarse):
        raise PartitionError(f"fine level {_level(fine)} is coarser than {_level(coarse)}")
    ccols = coarse.labels(mu.atoms)
    fcols = fine.labels(mu.atoms)
    order, starts = sort_groups(ccols + fcols)
    joint = group_sums(mu.numerators[order], starts)
    # parent coarse cell of each joint cell
    sc = [c[order][starts] for c in ccols]
    if len(starts) > 1:
        change = np.zeros(len(starts) - 1, dtype=bool)
        for c in sc:
            change |= c[1:] != c[:-1]
        pstarts = np.concatenate([[0], np.flatnonzero(change) + 1])
    else:
        pstarts = np.array([0])
    parent = group_sums(joint, pstarts)
    reps = np.diff(np.concatenate([pstarts, [len(joint)]]))
    d = mu.denominator
    jf = np.array([int(v) / d for v in joint.tolist()]) if joint.dtype == object or d >= 2**53 else joint / d
    pf = np.array([int(v) / d for v in parent.tolist()]) if parent.dtype == object or d >= 2**53 else parent / d
    ratio = jf / np.repeat(pf, reps)
    return float(-np.sum(jf * np.log2(ratio)))


# projections and maps -------------------------------------------------------

def project(mu: DiscreteMeasure, w) -> DiscreteMeasure:
    """pi_W mu as a measure on the real axis (coordinate <z, unit(w)>)."""
    coords = line_coordinate(mu.atoms, w)
    return DiscreteMeasure(coords.astype(complex), mu.numerators, mu.denominator, mu.tol)


def convolve(mu: DiscreteMeasure, nu: DiscreteMeasure, budget: int = DEFAULT_BUDGET) -> DiscreteMeasure:
    n = len(mu) * len(nu)
    if n > budget:
        raise BudgetError(f"convolution has {n} atoms, budget {budget}")
    atoms = np.add.outer(mu.atoms, nu.atoms).ravel()
    numer = outer_weights(mu.numerators, nu.numerators)
    return DiscreteMeasure(atoms, numer, mu.denominator * nu.denominator, min(mu.tol, nu.tol))


# components -------------------------------------------------------------------

def cell_of(z: complex, n: int) -> tuple[int, int]:
    s = 2.0 ** check_level(n)
    return int(math.floor(z.real * s)), int(math.floor(z.imag * s))


def _rescale(atoms: np.ndarray, n: int, cell: tuple[int, int]) -> np.ndarray:
    s = 2.0**n
    return (atoms.real * s - cell[0]) + 1j * (atoms.imag * s - cell[1])


def component(mu: DiscreteMeasure, level: int, cell: tuple[int, int], rescaled: bool = False) -> DiscreteMeasure:
    """Raw (conditioned) or rescaled D-component of mu for the level-n cell `cell`."""
    cols = Dyadic(level).labels(mu.atoms)
    mask = (cols[0] == cell[0]) & (cols[1] == cell[1])
    if not np.any(mask):
        raise EmptyComponentError(f"cell {cell} at level {level} has zero mass")
    atoms = mu.atoms[mask]
    numer = mu.numerators[mask]
    total = sum(int(v) for v in numer.tolist()) if numer.dtype == object else int(numer.sum())
    if rescaled:
        atoms = _rescale(atoms, level, cell)
    return DiscreteMeasure(atoms, numer, total, mu.tol)


def iter_components(mu: DiscreteMeasure, level: int, rescaled: bool = True) -> Iterator[tuple[tuple[int, int], Fraction, DiscreteMeasure]]:
    """(cell, mu(cell), component) for every cell of D_level with positive mass."""
    cols = Dyadic(level).labels(mu.atoms)
    order, starts = sort_groups(cols)
    ends = np.concatenate([starts[1:], [order.size]])
    for a, b in zip(starts, ends):
        idx = order[a:b]
        cell = (int(cols[0][idx[0]]), int(cols[1][idx[0]]))
        numer = mu.numerators[idx]
        total = sum(int(v) for v in numer.tolist()) if numer.dtype == object else int(numer.sum())
        atoms = mu.atoms[idx]
        if rescaled:
            atoms = _rescale(atoms, level, cell)
        yield cell, Fraction(total, mu.denominator), DiscreteMeasure(atoms, numer, total, mu.tol)


@dataclass(frozen=True)
class ComponentEntropy:
    """Statistic mu^D -> H_m(mu^D) on rescaled components."""

    m: int

    def __call__(self, comp: DiscreteMeasure) -> float:
        return normalized_entropy(comp, self.m)


def component_expectation(mu: DiscreteMeasure, levels: Iterable[int], statistic: Callable[[DiscreteMeasure], float]) -> float:
    """(1/|levels|) sum_i sum_D mu(D) statistic(mu^D), rescaled components at level i.

    For ComponentEntropy the inner sum equals H(mu, D_{i+m} | D_i)/m because
    rescaling by 2^i maps D_{i+m} cells onto D_m cells exactly; that identity is
    used directly instead of building every component.
    """
    levels = list(levels)
    if not levels:
        raise ValueError("empty level range")
    total = 0.0
    for i in levels:
        if isinstance(statistic, ComponentEntropy):
            total += conditional_entropy(mu, Dyadic(i + statistic.m), Dyadic(i)) / statistic.m
        else:
            total += sum(float(w) * statistic(c) for _, w, c in iter_components(mu, i, rescaled=True))
    return total / len(levels)


# tubes ------------------------------------------------------------------------

def max_window_mass(coords: np.ndarray, probs: np.ndarray, width: float) -> float:
    """max over c of the mass of {coords in (c - width/2, c + width/2)} (open window)."""
    order = np.argsort(coords, kind="stable")
    s = coords[order]
    cum = np.concatenate([[0.0], np.cumsum(probs[order])])
    hi = np.searchsorted(s, s + width, side="left")
    lo = np.arange(s.size)
    return float(np.max(cum[hi] - cum[lo]))


def tube_frostman_statistic(mu: DiscreteMeasure, radii: Sequence[float], directions: int = 180, golden_offset: bool = False) -> list[tuple[float, float]]:
    """For each r, max over directions and atom-anchored offsets of mu(B(W + x, r))."""
    if directions < 8:
        raise ValueError("direction grid must have at least 8 angles")
    probs = mu.probabilities
    grid = direction_grid(directions, golden_offset)
    normals = [line_coordinate(mu.atoms, w.perp) for w in grid]
    out = []
    for r in radii:
        best = max(max_window_mass(c, probs, 2.0 * r) for c in normals)
        out.append((float(r), min(best, 1.0)))
    return out


def frostman_exponent(stat: Sequence[tuple[float, float]]) -> float:
    """Slope of log(max tube mass) against log r."""
    r = np.log([s[0] for s in stat])
    m = np.log([s[1] for s in stat])
    return float(np.polyfit(r, m, 1)[0])
