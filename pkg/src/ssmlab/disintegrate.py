"""Block models from a non-homogeneous IFS g_i(z) = lam^{beta_i} z + t_i and their splits."""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .ifs import DEFAULT_BUDGET, IFS, TAU_EQ, BudgetError, Similarity, as_fraction, compose, min_separation, self_similar_truncation
from .measure import DiscreteMeasure, compare_measures, mixture, weight_array
from .model import Bernoulli, IdentityCheck, Model, eta_raw, eta_truncated, delta_n

BlockIndex = tuple


class ParameterError(ValueError):
    pass


def psi(word: Sequence[int], k: int, r: int | None = None) -> BlockIndex:
    """Occurrence counts (N_1(w), ..., N_k(w))."""
    word = tuple(word)
    if r is not None and len(word) != r:
        raise ValueError(f"word length {len(word)} differs from block length {r}")
    counts = [0] * k
    for s in word:
        if not 1 <= s <= k:
            raise ValueError(f"symbol {s} outside 1..{k}")
        counts[s - 1] += 1
    return tuple(counts)


def block_indices(k: int, r: int) -> list[BlockIndex]:
    """I(r): count vectors of length k summing to r, in lexicographic order."""
    return [c for c in itertools.product(range(r + 1), repeat=k) if sum(c) == r]


def preimage_words(counts: BlockIndex) -> list[tuple[int, ...]]:
    """Psi^{-1}(counts) in lexicographic word order."""
    k = len(counts)
    r = sum(counts)
    return [w for w in itertools.product(range(1, k + 1), repeat=r) if psi(w, k) == tuple(counts)]


def multinomial(counts: BlockIndex) -> int:
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def principal_power(lam: complex, beta: complex) -> complex:
    """lam^beta = exp(beta Log lam) with the principal branch; lam on (-inf, 0] is rejected."""
    lam = complex(lam)
    if lam.imag == 0 and lam.real <= 0:
        raise ParameterError(f"lambda = {lam} lies on the branch cut (-inf, 0]")
    return cmath.exp(complex(beta) * cmath.log(lam))


@dataclass(frozen=True)
class DisintegrationPlan:
    translations: tuple
    probs: tuple
    betas: tuple
    r: int = 2
    s: int | None = None

    def __post_init__(self):
        ts = tuple(complex(t) for t in self.translations)
        ps = tuple(as_fraction(p) for p in self.probs)
        bs = tuple(complex(b) for b in self.betas)
        if not (len(ts) == len(ps) == len(bs)) or not ts:
            raise ValueError("translations, probs and betas need one entry per map")
        if bs[0] != 1:
            raise ValueError("beta_1 must equal 1")
        if any(p <= 0 for p in ps) or sum(ps) != 1:
            raise ValueError("probabilities must be positive and sum exactly to 1")
        if int(self.r) < 2:
            raise ValueError("block length r must be at least 2")
        if self.s is not None and int(self.s) < 2:
            raise ValueError("split period s must be at least 2")
        object.__setattr__(self, "translations", ts)
        object.__setattr__(self, "probs", ps)
        object.__setattr__(self, "betas", bs)
        object.__setattr__(self, "r", int(self.r))

    @property
    def k(self) -> int:
        return len(self.translations)


def base_ifs(plan: DisintegrationPlan, lam: complex) -> IFS:
    maps = []
    for t, b in zip(plan.translations, plan.betas):
        l = principal_power(lam, b)
        if not abs(l) < 1:
            raise ParameterError(f"|lambda^{b}| = {abs(l)} is not a contraction")
        maps.append(Similarity(l, t))
    return IFS(tuple(maps), plan.probs)


def block_weights(plan: DisintegrationPlan) -> dict:
    """q_n = |Psi^{-1}(n)| p_1^{n_1} ... p_k^{n_k}."""
    out = {}
    for c in block_indices(plan.k, plan.r):
        q = Fraction(multinomial(c))
        for p, e in zip(plan.probs, c):
            q *= p**e
        out[c] = q
    return out


def block_system(plan: DisintegrationPlan, lam: complex, counts: BlockIndex, base: IFS | None = None) -> IFS:
    """Homogeneous IFS {g_u : Psi(u) = counts} with linear part lam^{gamma} and uniform weights."""
    base = base_ifs(plan, lam) if base is None else base
    gamma = sum(c * b for c, b in zip(counts, plan.betas))
    lin = principal_power(lam, gamma)
    if not abs(lin) < 1:
        raise ParameterError(f"|lambda^gamma| = {abs(lin)} is not a contraction for {counts}")
    words = preimage_words(counts)
    maps = tuple(Similarity(lin, compose(base, w).t) for w in words)
    return IFS(maps, tuple([Fraction(1, len(words))] * len(words)))


def build_block_model(plan: DisintegrationPlan, lam: complex, seed: int = 0, budget: int = DEFAULT_BUDGET,
                      q_override: Mapping | None = None) -> Model:
    """Sigma_lambda over I(r) with Bernoulli selection q."""
    if plan.k**plan.r > budget:
        raise BudgetError(f"{plan.k}^{plan.r} words exceed the budget {budget}")
    base = base_ifs(plan, lam)
    q = block_weights(plan) if q_override is None else {c: as_fraction(v) for c, v in q_override.items()}
    systems = {c: block_system(plan, lam, c, base) for c in block_indices(plan.k, plan.r)}
    return Model(systems, Bernoulli(q, seed), meta={"kind": "block", "lambda": complex(lam), "r": plan.r})


def all_prefixes(labels: Sequence, q: Mapping, m: int):
    """(omega', P(omega')) for omega' in I^m under the product measure q."""
    for w in itertools.product(labels, repeat=m):
        p = Fraction(1)
        for s in w:
            p *= q[s]
        yield w, p


def verify_disintegration(plan: DisintegrationPlan, lam: complex, m: int, budget: int = DEFAULT_BUDGET,
                          tol: float = TAU_EQ, q_override: Mapping | None = None) -> IdentityCheck:
    """Depth-rm truncation of nu_lambda^p equals the q-mixture of depth-m truncations of eta^(omega')."""
    if plan.k ** (plan.r * m) > budget:
        raise BudgetError(f"{plan.k}^{plan.r * m} words exceed the budget {budget}")
    left = self_similar_truncation(base_ifs(plan, lam), plan.r * m, budget, tol)
    model = build_block_model(plan, lam, budget=budget)
    q = block_weights(plan) if q_override is None else {c: as_fraction(v) for c, v in q_override.items()}
    atoms, numer = [], []
    dens = []
    parts = []
    for w, p in all_prefixes(model.labels, q, m):
        if p == 0:
            continue
        pts, num, den = eta_raw(model, w, budget)
        parts.append((p, pts, num, den))
        dens.append(p.denominator * den)
    d = math.lcm(*dens)
    for p, pts, num, den in parts:
        scale = p.numerator * (d // (p.denominator * den))
        atoms.append(pts)
        numer.extend(int(v) * scale for v in num.tolist())
    total = sum(numer)
    if total != d:
        # a corrupted q no longer sums to one; compare against the unnormalized mass
        right = DiscreteMeasure(np.concatenate(atoms), weight_array(numer), total, tol)
        diff = compare_measures(left, right, tol)
        diff.equal = False
        diff.first_mismatch = f"mixture mass {Fraction(total, d)} != 1"
        diff.weight_residue += abs(Fraction(total, d) - 1)
        return IdentityCheck(False, diff, {"depth_blocks": m})
    right = DiscreteMeasure(np.concatenate(atoms), weight_array(numer), d, tol)
    diff = compare_measures(left, right, tol)
    return IdentityCheck(diff.equal, diff, {"depth_blocks": m, "atoms": len(left)})


def split_model(plan: DisintegrationPlan, lam: complex, s: int | None = None, seed: int = 0) -> tuple[Model, Model]:
    """(Sigma', Sigma'') over I(r)^s.

    Sigma' keeps the s-th block's translations, scaled by lam_{i_1} ... lam_{i_{s-1}} so
    that eta = eta' * eta'' holds exactly; Sigma'' carries positions 1..s-1 with uniform weights.
    """
    s = plan.s if s is None else s
    if s is None or s < 2:
        raise ValueError("split period s >= 2 required")
    block = build_block_model(plan, lam)
    q = block.selection.q
    labels = block.labels
    sys1, sys2, qs = {}, {}, {}
    for combo in itertools.product(labels, repeat=s):
        lin = 1 + 0j
        for c in combo:
            lin *= block.lam(c)
        head = 1 + 0j
        for c in combo[:-1]:
            head *= block.lam(c)
        last = block.systems[combo[-1]]
        sys1[combo] = IFS(tuple(Similarity(lin, head * m.t) for m in last.maps), last.probs)
        # composed translations over positions 1..s-1
        pts = np.zeros(1, dtype=complex)
        pre = 1 + 0j
        for c in combo[:-1]:
            pts = (pts[:, None] + pre * block.systems[c].translations[None, :]).ravel()
            pre *= block.lam(c)
        n = pts.size
        sys2[combo] = IFS(tuple(Similarity(lin, t) for t in pts), tuple([Fraction(1, n)] * n))
        p = Fraction(1)
        for c in combo:
            p *= q[c]
        qs[combo] = p
    sel = Bernoulli(qs, seed)
    return (Model(sys1, sel, meta={"kind": "split-prime", "s": s}),
            Model(sys2, sel, meta={"kind": "split-double-prime", "s": s}))


def regroup(omega: Sequence, s: int) -> tuple:
    """F(omega) = ((omega_1..omega_s), (omega_{s+1}..omega_{2s}), ...)."""
    omega = tuple(omega)
    return tuple(tuple(omega[j * s:(j + 1) * s]) for j in range(len(omega) // s))


def verify_split(plan: DisintegrationPlan, lam: complex, omega: Sequence, s: int | None = None,
                 budget: int = DEFAULT_BUDGET, tol: float = TAU_EQ) -> IdentityCheck:
    """eta^(omega) = eta'^(F omega) * eta''^(F omega) at depth s*N blocks."""
    from .entropy import convolve

    s = plan.s if s is None else s
    block = build_block_model(plan, lam)
    one, two = split_model(plan, lam, s)
    fo = regroup(omega, s)
    left = eta_truncated(block, tuple(omega)[: len(fo) * s], budget, tol)
    right = convolve(eta_truncated(one, fo, budget, tol), eta_truncated(two, fo, budget, tol), budget)
    diff = compare_measures(left, right, tol)
    return IdentityCheck(diff.equal, diff, {"super_blocks": len(fo), "s": s})


def _entropy_mp(probs, mp):
    return -mp.fsum(mp.mpf(p.numerator) / p.denominator * mp.log(mp.mpf(p.numerator) / p.denominator, 2) for p in probs)


def block_sdim_closed_form(plan: DisintegrationPlan, lam: complex, dps: int = 50):
    """(1 - H(q)/(r H(p))) s(lambda, p) evaluated in mpmath."""
    import mpmath as mp

    with mp.workdps(dps):
        q = block_weights(plan)
        hq = _entropy_mp(list(q.values()), mp)
        hp = _entropy_mp(plan.probs, mp)
        L = mp.log(mp.mpc(lam))
        lyap = mp.fsum(mp.mpf(p.numerator) / p.denominator * mp.re(mp.mpc(b) * L) for p, b in zip(plan.probs, plan.betas)) / mp.log(2)
        s_lp = -hp / lyap
        return (1 - hq / (plan.r * hp)) * s_lp


def similarity_dimension_mp(plan: DisintegrationPlan, lam: complex, dps: int = 50):
    import mpmath as mp

    with mp.workdps(dps):
        hp = _entropy_mp(plan.probs, mp)
        L = mp.log(mp.mpc(lam))
        lyap = mp.fsum(mp.mpf(p.numerator) / p.denominator * mp.re(mp.mpc(b) * L) for p, b in zip(plan.probs, plan.betas)) / mp.log(2)
        return -hp / lyap


@dataclass
class NondegeneracyReport:
    fixed_points: list
    coincident_pairs: list
    commutators: dict
    root_condition: float | None
    nondegenerate: bool

    def as_dict(self) -> dict:
        return {
            "fixed_points": [[z.real, z.imag] for z in self.fixed_points],
            "coincident_pairs": self.coincident_pairs,
            "commutators": {f"{i},{j}": v for (i, j), v in self.commutators.items()},
            "root_condition": self.root_condition,
            "nondegenerate": self.nondegenerate,
        }


def nondegeneracy_check(plan: DisintegrationPlan, lam: complex, tol: float = TAU_EQ) -> NondegeneracyReport:
    """Fixed points t_i/(1 - lam^{beta_i}); maps share a fixed point iff they commute."""
    lams = [principal_power(lam, b) for b in plan.betas]
    fps = [t / (1 - l) for t, l in zip(plan.translations, lams)]
    pairs = [(i + 1, j + 1) for i in range(plan.k) for j in range(i + 1, plan.k) if abs(fps[i] - fps[j]) <= tol]
    comm = {}
    for i in range(plan.k):
        for j in range(i + 1, plan.k):
            ti, tj = plan.translations[i], plan.translations[j]
            comm[(i + 1, j + 1)] = abs(lams[i] * tj + ti - lams[j] * ti - tj)
    root = None
    if plan.k >= 2:
        t1, t2 = plan.translations[0], plan.translations[1]
        root = abs(lam * t2 - lams[1] * t1 + t1 - t2)
    spread = max(abs(z - fps[0]) for z in fps)
    return NondegeneracyReport(fps, pairs, comm, root, spread > tol)


def delta_comparison(plan: DisintegrationPlan, lam: complex, omega: Sequence, s: int | None = None,
                     budget: int = DEFAULT_BUDGET) -> tuple[float, float]:
    """(Delta_n^{(F omega)}(Sigma''), Delta~_{r s n}(lambda)) for n = number of super-blocks."""
    s = plan.s if s is None else s
    _, two = split_model(plan, lam, s)
    fo = regroup(omega, s)
    return delta_n(two, fo, budget), min_separation(base_ifs(plan, lam), plan.r * s * len(fo), budget)
