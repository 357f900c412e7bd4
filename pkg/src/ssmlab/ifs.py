"""Similarity maps z -> lam*z + t on the complex plane and finite IFS built from them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

TAU_EQ = 1e-9
DEFAULT_BUDGET = 10**6


class AlphabetError(ValueError):
    pass


class CompositionError(ValueError):
    """Raised for the empty word: the identity is not a contraction."""


class BudgetError(RuntimeError):
    pass


def as_fraction(value) -> Fraction:
    """Parse an exact probability from a Fraction, int, decimal string or "a/b" string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a probability")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        # floats are exact dyadic rationals; keep that value
        return Fraction(value)
    raise TypeError(f"cannot read {value!r} as an exact rational")


@dataclass(frozen=True)
class Similarity:
    lam: complex
    t: complex = 0j

    def __post_init__(self):
        lam = complex(self.lam)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "t", complex(self.t))
        if not 0.0 < abs(lam) < 1.0:
            raise ValueError(f"|lambda| must lie in (0, 1), got {abs(lam)}")

    @property
    def r(self) -> float:
        return abs(self.lam)

    @property
    def phi(self) -> complex:
        return self.lam / abs(self.lam)

    def __call__(self, z):
        return self.lam * z + self.t

    def then(self, inner: "Similarity") -> "Similarity":
        """self o inner."""
        return Similarity(self.lam * inner.lam, self.lam * inner.t + self.t)


@dataclass(frozen=True)
class IFS:
    maps: tuple[Similarity, ...]
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        maps = tuple(self.maps)
        probs = tuple(as_fraction(p) for p in self.probs)
        if len(maps) < 1:
            raise ValueError("an IFS needs at least one map")
        if len(probs) != len(maps):
            raise ValueError("one probability per map is required")
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be positive")
        if sum(probs) != 1:
            raise ValueError(f"probabilities sum to {sum(probs)}, not exactly 1")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_lists(cls, lambdas, translations, probs=None) -> "IFS":
        translations = list(translations)
        if np.ndim(lambdas) == 0:
            lambdas = [lambdas] * len(translations)
        if probs is None:
            probs = [Fraction(1, len(translations))] * len(translations)
        maps = tuple(Similarity(complex(l), complex(t)) for l, t in zip(lambdas, translations))
        return cls(maps, tuple(probs))

    @property
    def k(self) -> int:
        return len(self.maps)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.maps], dtype=complex)

    @property
    def translations(self) -> np.ndarray:
        return np.array([m.t for m in self.maps], dtype=complex)

    @property
    def prob_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    @property
    def is_homogeneous(self) -> bool:
        return all(m.lam == self.maps[0].lam for m in self.maps)

    def permuted(self, order: Sequence[int]) -> "IFS":
        return IFS(tuple(self.maps[i] for i in order), tuple(self.probs[i] for i in order))


def check_word(word: Iterable[int], k: int) -> tuple[int, ...]:
    word = tuple(int(s) for s in word)
    for s in word:
        if not 1 <= s <= k:
            raise AlphabetError(f"symbol {s} outside alphabet 1..{k}")
    return word


def compose(ifs: IFS, word: Sequence[int]) -> Similarity:
    """g_{u1} o ... o g_{un}; the first symbol is the outermost map."""
    word = check_word(word, ifs.k)
    if not word:
        raise CompositionError("empty word gives the identity, which is not a contraction")
    lam, t = 1 + 0j, 0j
    for s in word:
        g = ifs.maps[s - 1]
        t = t + lam * g.t
        lam = lam * g.lam
    return Similarity(lam, t)


def truncated_projection(ifs: IFS, word: Sequence[int]) -> complex:
    """sum_k (prod_{j<k} lam_{u_j}) t_{u_k}, same accumulation order as compose."""
    return compose(ifs, word).t


def similarity_dimension(ifs: IFS) -> float:
    p = ifs.prob_array
    r = np.abs(ifs.lambdas)
    return float(np.sum(p * np.log2(p)) / np.sum(p * np.log2(r)))


def support_radius(ifs: IFS, headroom: float = 0.01) -> float:
    """Minimal R with supp in B(0,R), padded by 1%."""
    r_max = float(np.max(np.abs(ifs.lambdas)))
    t_max = float(np.max(np.abs(ifs.translations)))
    return t_max / (1.0 - r_max) * (1.0 + headroom)


def word_points(ifs: IFS, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """All k^n truncated projections, words in lexicographic order (u_1 most significant)."""
    if n < 0:
        raise ValueError("depth must be non-negative")
    if ifs.k**n > budget:
        raise BudgetError(f"{ifs.k}^{n} words exceed the budget {budget}")
    lam = ifs.lambdas
    t = ifs.translations
    pts = np.zeros(1, dtype=complex)
    prod = np.ones(1, dtype=complex)
    for _ in range(n):
        pts = (pts[:, None] + prod[:, None] * t[None, :]).ravel()
        prod = (prod[:, None] * lam[None, :]).ravel()
    return pts


def word_weights(probs: Sequence[Fraction], n: int) -> tuple[np.ndarray, int]:
    """Numerators of p_u over the common denominator d^n, lexicographic word order."""
    d = math.lcm(*(p.denominator for p in probs))
    num = [p.numerator * (d // p.denominator) for p in probs]
    denom = d**n
    dtype = np.int64 if denom < 2**62 else object
    w = np.ones(1, dtype=dtype)
    step = np.array(num, dtype=dtype)
    for _ in range(n):
        w = (w[:, None] * step[None, :]).ravel()
    return w, denom


def self_similar_truncation(ifs: IFS, n: int, budget: int = DEFAULT_BUDGET, tol: float = TAU_EQ):
    """Depth-n atomic approximation sum_u p_u delta_{g_u(0)}."""
    from .measure import DiscreteMeasure

    pts = word_points(ifs, n, budget)
    w, denom = word_weights(ifs.probs, n)
    return DiscreteMeasure(pts, w, denom, tol=tol)


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest distance between two entries (duplicates give 0); inf for fewer than 2 points."""
    points = np.asarray(points, dtype=complex)
    if points.size < 2:
        return math.inf
    xy = np.column_stack([points.real, points.imag])
    d, _ = cKDTree(xy).query(xy, k=2)
    return float(np.min(d[:, 1]))


def min_separation(ifs: IFS, n: int, budget: int = DEFAULT_BUDGET, tol: float = TAU_EQ) -> float:
    """min |g_u(0) - g_v(0)| over distinct words of length n; 0 on coincidence within tol."""
    pts = word_points(ifs, n, budget)
    if pts.size < 2:
        return 0.0
    d = min_pairwise_distance(pts)
    return 0.0 if d <= tol else d
