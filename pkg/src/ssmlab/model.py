"""Random models: a family of homogeneous IFS indexed by I plus a selection process on I^N."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Mapping, Sequence, Union

import numpy as np

from .entropy import LineDirection, as_direction
from .ifs import DEFAULT_BUDGET, IFS, TAU_EQ, BudgetError, as_fraction, min_pairwise_distance
from .measure import DiscreteMeasure, MultisetDiff, compare_measures, outer_weights, weight_array

Label = Hashable


class PrefixTooShortError(ValueError):
    pass


# selection processes ---------------------------------------------------------

def _rng(seed: int, stream: str = "selection") -> np.random.Generator:
    # sub-streams derived from fixed labels keep runs reproducible
    tag = int.from_bytes(stream.encode(), "little") % (2**32)
    return np.random.default_rng([int(seed) % 2**64, tag])


@dataclass(frozen=True)
class Bernoulli:
    q: Mapping[Label, Fraction]
    seed: int = 0

    def __post_init__(self):
        q = {k: as_fraction(v) for k, v in dict(self.q).items()}
        if not q or any(v < 0 for v in q.values()) or sum(q.values()) != 1:
            raise ValueError("Bernoulli marginal must be a probability vector summing exactly to 1")
        object.__setattr__(self, "q", q)

    @property
    def labels(self) -> list:
        return list(self.q)

    def marginal(self) -> dict:
        return {k: float(v) for k, v in self.q.items()}

    def draw(self, n: int, given: Sequence = (), stream: str = "selection") -> tuple:
        labels = self.labels
        p = np.array([float(self.q[k]) for k in labels])
        idx = _rng(self.seed, stream).choice(len(labels), size=n, p=p)
        out = [labels[i] for i in idx]
        out[: len(given)] = list(given)[:n]
        return tuple(out)


@dataclass(frozen=True)
class Markov:
    states: tuple
    matrix: tuple
    seed: int = 0

    def __post_init__(self):
        states = tuple(self.states)
        mat = np.array([[float(as_fraction(x)) for x in row] for row in self.matrix])
        if mat.shape != (len(states), len(states)):
            raise ValueError("transition matrix shape does not match the states")
        if np.any(mat < 0) or not np.allclose(mat.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("transition rows must be probability vectors")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "matrix", tuple(tuple(r) for r in mat.tolist()))
        self.stationary()

    @property
    def labels(self) -> list:
        return list(self.states)

    def stationary(self) -> np.ndarray:
        mat = np.array(self.matrix)
        w, v = np.linalg.eig(mat.T)
        ones = np.flatnonzero(np.abs(w - 1.0) < 1e-10)
        if ones.size != 1:
            raise ValueError("Markov chain must have a unique stationary vector")
        pi = np.real(v[:, ones[0]])
        return pi / pi.sum()

    def marginal(self) -> dict:
        return dict(zip(self.states, self.stationary().tolist()))

    def draw(self, n: int, given: Sequence = (), stream: str = "selection") -> tuple:
        rng = _rng(self.seed, stream)
        mat = np.array(self.matrix)
        given = list(given)[:n]
        out = list(given)
        if not out and n > 0:
            out.append(self.states[rng.choice(len(self.states), p=self.stationary())])
        while len(out) < n:
            cur = self.states.index(out[-1])
            out.append(self.states[rng.choice(len(self.states), p=mat[cur])])
        return tuple(out)


@dataclass(frozen=True)
class Explicit:
    sequence: tuple
    seed: int = 0

    def __post_init__(self):
        seq = tuple(self.sequence)
        if not seq:
            raise ValueError("explicit sequence must be non-empty")
        object.__setattr__(self, "sequence", seq)

    @property
    def labels(self) -> list:
        return list(dict.fromkeys(self.sequence))

    def marginal(self) -> dict:
        n = len(self.sequence)
        return {k: self.sequence.count(k) / n for k in self.labels}

    def draw(self, n: int, given: Sequence = (), stream: str = "selection") -> tuple:
        out = [self.sequence[i % len(self.sequence)] for i in range(n)]
        out[: len(given)] = list(given)[:n]
        return tuple(out)


SelectionProcess = Union[Bernoulli, Markov, Explicit]


# the model ----------------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    systems: Mapping[Label, IFS]
    selection: SelectionProcess
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        systems = dict(self.systems)
        for label, ifs in systems.items():
            if not ifs.is_homogeneous:
                raise ValueError(f"system {label!r} is not homogeneous")
        missing = [l for l in self.selection.labels if l not in systems]
        if missing:
            raise ValueError(f"selection uses labels without a system: {missing}")
        object.__setattr__(self, "systems", systems)

    @property
    def labels(self) -> list:
        return list(self.systems)

    def lam(self, i) -> complex:
        return self.systems[i].maps[0].lam

    def r(self, i) -> float:
        return abs(self.lam(i))

    def k(self, i) -> int:
        return self.systems[i].k

    def support_radius(self, headroom: float = 0.01) -> float:
        """R = max|t| / (1 - r_max) over all systems, plus headroom."""
        r_max = max(self.r(i) for i in self.labels)
        t_max = max(float(np.max(np.abs(s.translations))) for s in self.systems.values())
        return t_max / (1.0 - r_max) * (1.0 + headroom)

    def omega(self, n: int, prefix: Sequence = ()) -> tuple:
        """First n symbols of omega: the given prefix, then seeded draws."""
        prefix = tuple(prefix)
        if len(prefix) >= n:
            return prefix[:n]
        return self.selection.draw(n, given=prefix)


def _check_prefix(model: Model, omega: Sequence) -> tuple:
    omega = tuple(omega)
    for s in omega:
        if s not in model.systems:
            raise ValueError(f"symbol {s!r} is not in the index set")
    return omega


def _denominators(model: Model) -> dict:
    out = {}
    for i, ifs in model.systems.items():
        d = math.lcm(*(p.denominator for p in ifs.probs))
        out[i] = (d, np.array([p.numerator * (d // p.denominator) for p in ifs.probs], dtype=np.int64))
    return out


def eta_raw(model: Model, omega: Sequence, budget: int = DEFAULT_BUDGET) -> tuple[np.ndarray, np.ndarray, int]:
    """Unmerged atoms, numerators and denominator of the depth-|omega| truncation, lexicographic order."""
    omega = _check_prefix(model, omega)
    size = 1
    for s in omega:
        size *= model.k(s)
    if size > budget:
        raise BudgetError(f"{size} atoms exceed the budget {budget}")
    dens = _denominators(model)
    pts = np.zeros(1, dtype=complex)
    numer = np.ones(1, dtype=np.int64)
    denom = 1
    prod = 1 + 0j
    for s in omega:
        ifs = model.systems[s]
        pts = (pts[:, None] + prod * ifs.translations[None, :]).ravel()
        d, num = dens[s]
        numer = outer_weights(numer, num)
        denom *= d
        prod = prod * model.lam(s)
    return pts, numer, denom


def eta_truncated(model: Model, omega: Sequence, budget: int = DEFAULT_BUDGET, tol: float = TAU_EQ) -> DiscreteMeasure:
    """sum_u p_u delta_{Pi^n_omega(u)} over u in X_n^(omega)."""
    pts, numer, denom = eta_raw(model, omega, budget)
    return DiscreteMeasure(pts, numer, denom, tol)


def linear_product(model: Model, omega: Sequence) -> complex:
    prod = 1 + 0j
    for s in omega:
        prod = prod * model.lam(s)
    return prod


@dataclass
class IdentityCheck:
    holds: bool
    diff: MultisetDiff
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds

    def as_dict(self) -> dict:
        return {"holds": self.holds, **self.diff.as_dict(), **self.detail}


def verify_dynamic_self_similarity(model: Model, omega: Sequence, k: int, budget: int = DEFAULT_BUDGET,
                                   tol: float = TAU_EQ, corrupt: Fraction | None = None) -> IdentityCheck:
    """eta^(omega) = sum_u p_u (lam_{omega_1..omega_k} eta^(T^k omega) + t_u) at depth |omega|.

    `corrupt` shifts weight between the first two words on the right side (negative control).
    """
    omega = _check_prefix(model, omega)
    n = len(omega)
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < prefix length")
    left = eta_truncated(model, omega, budget, tol)
    head_pts, head_num, head_den = eta_raw(model, omega[:k], budget)
    tail_pts, tail_num, tail_den = eta_raw(model, omega[k:], budget)
    lam_k = linear_product(model, omega[:k])
    head_num = head_num.astype(object)
    if corrupt is not None and head_num.size >= 2:
        c = as_fraction(corrupt)
        head_num = head_num * c.denominator
        head_den *= c.denominator
        head_num[0] += c.numerator
        head_num[1] -= c.numerator
    atoms, numer = [], []
    for u in range(head_pts.size):
        # one scaled and translated copy of the shifted measure per word u
        atoms.append(lam_k * tail_pts + head_pts[u])
        numer.append(tail_num.astype(object) * head_num[u])
    right = DiscreteMeasure(np.concatenate(atoms), weight_array(np.concatenate(numer).tolist()), head_den * tail_den, tol)
    diff = compare_measures(left, right, tol)
    return IdentityCheck(diff.equal, diff, {"depth": n, "k": k})


def convolution_decomposition(model: Model, omega: Sequence, n_split: int, budget: int = DEFAULT_BUDGET,
                              tol: float = TAU_EQ) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """(nu^(omega, n'), lam_{omega|n'} eta^(T^{n'} omega)) truncated so depths add up to |omega|."""
    omega = _check_prefix(model, omega)
    nu = eta_truncated(model, omega[:n_split], budget, tol)
    tail = eta_truncated(model, omega[n_split:], budget, tol)
    return nu, tail.map_atoms(linear_product(model, omega[:n_split]))


def verify_convolution_decomposition(model: Model, omega: Sequence, n_split: int, budget: int = DEFAULT_BUDGET,
                                     tol: float = TAU_EQ) -> IdentityCheck:
    from .entropy import convolve

    omega = _check_prefix(model, omega)
    left = eta_truncated(model, omega, budget, tol)
    nu, tau = convolution_decomposition(model, omega, n_split, budget, tol)
    diff = compare_measures(left, convolve(nu, tau, budget), tol)
    return IdentityCheck(diff.equal, diff, {"depth": len(omega), "split": n_split})


def _entropy_bits(ifs: IFS) -> float:
    p = ifs.prob_array
    return float(-np.sum(p * np.log2(p)))


def model_sdim(model: Model, mc_samples: int | None = None, dps: int | None = None) -> float:
    """sum_i q_i H(p_i) / (-sum_i q_i log r_i) with q the one-coordinate marginal of the selection.

    Explicit selections use the exact period average, or the first mc_samples symbols when given.
    With dps set the sums are evaluated in mpmath at that many digits.
    """
    sel = model.selection
    if isinstance(sel, Explicit) and mc_samples is not None:
        seq = sel.draw(mc_samples)
        q = {k: Fraction(seq.count(k), len(seq)) for k in dict.fromkeys(seq)}
    elif isinstance(sel, Bernoulli):
        q = dict(sel.q)
    elif isinstance(sel, Explicit):
        n = len(sel.sequence)
        q = {k: Fraction(sel.sequence.count(k), n) for k in sel.labels}
    else:
        q = sel.marginal()
    if dps is not None:
        import mpmath as mp

        with mp.workdps(dps):
            num = mp.mpf(0)
            den = mp.mpf(0)
            for i, qi in q.items():
                if qi == 0:
                    continue
                qv = mp.mpf(qi.numerator) / qi.denominator if isinstance(qi, Fraction) else mp.mpf(qi)
                ifs = model.systems[i]
                h = -mp.fsum(mp.mpf(p.numerator) / p.denominator * mp.log(mp.mpf(p.numerator) / p.denominator, 2) for p in ifs.probs)
                num += qv * h
                den -= qv * mp.log(mp.mpf(model.r(i)), 2)
            return num / den
    num = sum(float(qi) * _entropy_bits(model.systems[i]) for i, qi in q.items() if qi)
    den = -sum(float(qi) * math.log2(model.r(i)) for i, qi in q.items() if qi)
    return num / den


def delta_n(model: Model, omega: Sequence, budget: int = DEFAULT_BUDGET, tol: float = TAU_EQ) -> float:
    """min |f_u(0) - f_v(0)| over distinct u, v in X_n; 0 when |X_n| = 1 or on coincidence."""
    pts, _, _ = eta_raw(model, omega, budget)
    if pts.size < 2:
        return 0.0
    d = min_pairwise_distance(pts)
    return 0.0 if d <= tol else d


def k_prime(model: Model, omega: Sequence, k: int, R: float | None = None) -> int:
    """Smallest k' with 2R prod_{i<=k'} r_{omega_i} <= 2^-k."""
    R = model.support_radius() if R is None else float(R)
    target = 2.0**-k
    prod = 2.0 * R
    if prod <= target:
        return 0
    for j, s in enumerate(omega, start=1):
        prod *= model.r(s)
        if prod <= target:
            return j
    raise PrefixTooShortError(f"prefix of length {len(omega)} does not reach scale 2^-{k}")


def cocycle_constant(model: Model, R: float | None = None) -> int:
    """Bound c in |n' + k'(T^{n'} omega) - (n+k)'| <= c, from the two-sided scale brackets."""
    R = model.support_radius() if R is None else float(R)
    rs = [model.r(i) for i in model.labels]
    r_min, r_max = min(rs), max(rs)
    up = math.log(2 * R / r_min**2) if R > 0 else 0.0
    down = math.log(1 / (2 * R * r_min)) if R > 0 else 0.0
    return int(math.ceil(max(up, down, 0.0) / math.log(1 / r_max))) + 1


def skew_orbit(model: Model, omega: Sequence, w0, steps: int) -> list[LineDirection]:
    """V_0 = W, V_k = phi^{-1}_{omega_k} V_{k-1}, as lines in RP^1."""
    omega = _check_prefix(model, omega)
    if steps > len(omega):
        raise ValueError("steps exceed the prefix length")
    ang = as_direction(w0).angle
    out = [LineDirection(ang)]
    for s in omega[:steps]:
        ang = math.fmod(ang - math.atan2(model.lam(s).imag, model.lam(s).real), math.pi)
        out.append(LineDirection(ang))
    return out


def occupation_measure(orbit: Sequence[LineDirection], bins: int = 64) -> np.ndarray:
    angles = np.array([v.angle for v in orbit])
    h, _ = np.histogram(angles, bins=bins, range=(0.0, math.pi))
    return h / h.sum()


def tv_to_uniform(freq: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(freq - 1.0 / freq.size)))


def rotation_report(model: Model, threshold: float = 1e-9) -> dict:
    """|Im phi_i| for each positively weighted i; the non-real rotation condition as a margin."""
    marg = model.selection.marginal()
    ims = {str(i): abs(model.lam(i).imag / abs(model.lam(i))) for i in model.labels if marg.get(i, 0) > 0}
    best = max(ims.values()) if ims else 0.0
    return {"abs_im_phi": ims, "max_abs_im_phi": best, "threshold": threshold, "has_nonreal_rotation": best > threshold}
