from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from ssmlab.disintegrate import (
    DisintegrationPlan,
    ParameterError,
    base_ifs,
    block_indices,
    block_sdim_closed_form,
    block_weights,
    build_block_model,
    delta_comparison,
    nondegeneracy_check,
    preimage_words,
    principal_power,
    psi,
    regroup,
    similarity_dimension_mp,
    split_model,
    verify_disintegration,
    verify_split,
)
from ssmlab.ifs import self_similar_truncation
from ssmlab.measure import DiscreteMeasure
from ssmlab.model import eta_truncated, model_sdim

PLAN = DisintegrationPlan((0, 1), ("1/2", "1/2"), (1, 1), r=2, s=2)


def test_psi_examples():
    assert psi((2, 1, 2, 3), 3) == (1, 2, 1)
    assert psi((1, 1), 2) == (2, 0)
    assert len(preimage_words((1, 1))) == 2
    with pytest.raises(ValueError):
        psi((1, 2, 1), 2, r=2)


def test_plan_validation():
    with pytest.raises(ValueError):
        DisintegrationPlan((0, 1), ("1/2", "1/2"), (2, 1))
    with pytest.raises(ValueError):
        DisintegrationPlan((0, 1), ("1/2", "1/2"), (1, 1), r=1)
    with pytest.raises(ValueError):
        DisintegrationPlan((0, 1), ("1/2", "1/3"), (1, 1))


def test_principal_branch():
    assert principal_power(0.25, 0.5) == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        principal_power(-0.5, 0.5)
    with pytest.raises(ParameterError):
        base_ifs(DisintegrationPlan((0, 1), ("1/2", "1/2"), (1, -1)), 0.5)


def test_block_model_examples():
    assert block_weights(PLAN) == {(0, 2): Fraction(1, 4), (1, 1): Fraction(1, 2), (2, 0): Fraction(1, 4)}
    model = build_block_model(PLAN, 0.5)
    mixed = model.systems[(1, 1)]
    assert mixed.k == 2 and mixed.probs == (Fraction(1, 2), Fraction(1, 2))
    flat = DisintegrationPlan((0, 0), ("1/2", "1/2"), (1, 1))
    fm = build_block_model(flat, 0.5)
    assert all(len(set(s.translations.tolist())) == 1 for s in fm.systems.values())
    assert not nondegeneracy_check(flat, 0.5).nondegenerate


def test_block_model_linear_parts():
    plan = DisintegrationPlan((0, 1, 1j), ("1/2", "1/4", "1/4"), (1, 2, 0.5 + 0.5j), r=3)
    lam = 0.4 + 0.3j
    model = build_block_model(plan, lam)
    for c in block_indices(3, 3):
        gamma = sum(n * b for n, b in zip(c, plan.betas))
        assert model.lam(c) == pytest.approx(principal_power(lam, gamma), abs=1e-14)


@pytest.mark.parametrize("lam,m", [(0.5, 1), ((1 + 1j) / 2, 2), (0.3 + 0.45j, 2)])
def test_disintegration_identity(lam, m):
    assert verify_disintegration(PLAN, lam, m)


def test_disintegration_corrupted_q():
    q = dict(block_weights(PLAN))
    q[(1, 1)] += Fraction(1, 8)
    q[(2, 0)] -= Fraction(1, 8)
    assert not verify_disintegration(PLAN, 0.5, 2, q_override=q)


def test_block_atoms_equal_base_atoms():
    plan = DisintegrationPlan((0, 1), ("1/3", "2/3"), (1, 1.5), r=2)
    lam = 0.35 + 0.4j
    model = build_block_model(plan, lam)
    base = self_similar_truncation(base_ifs(plan, lam), 4)
    pts = np.concatenate([eta_truncated(model, w).atoms for w in itertools.product(model.labels, repeat=2)])
    ours = DiscreteMeasure.uniform(pts)
    assert ours.atoms.shape == base.atoms.shape
    assert np.max(np.abs(ours.atoms - base.atoms)) < 1e-12


def test_split_identity_and_dimensions():
    lam = 0.3 + 0.45j
    model = build_block_model(PLAN, lam, seed=3)
    omega = model.omega(4)
    assert verify_split(PLAN, lam, omega, 2)
    one, two = split_model(PLAN, lam, 2)
    full = model_sdim(model, dps=40)
    assert model_sdim(two, dps=40) == pytest.approx((1 - 1 / 2) * full, abs=1e-12)
    assert model_sdim(one, dps=40) == pytest.approx(full / 2, abs=1e-12)
    assert regroup(("a", "b", "c", "d", "e"), 2) == (("a", "b"), ("c", "d"))


@pytest.mark.parametrize("s", [2, 3, 5])
def test_split_share_shrinks_with_s(s):
    lam = 0.4 + 0.2j
    full = model_sdim(build_block_model(PLAN, lam), dps=40)
    one, two = split_model(PLAN, lam, s)
    assert model_sdim(one, dps=40) == pytest.approx(full / s, abs=1e-12)
    assert model_sdim(two, dps=40) == pytest.approx((1 - 1 / s) * full, abs=1e-12)


def test_nondegeneracy_examples():
    rep = nondegeneracy_check(PLAN, 0.5)
    assert rep.fixed_points == [0, 2] and rep.nondegenerate and not rep.coincident_pairs
    assert not nondegeneracy_check(DisintegrationPlan((0, 0), ("1/2", "1/2"), (1, 1)), 0.5).nondegenerate
    plan = DisintegrationPlan((1, 1), ("1/2", "1/2"), (1, 2))
    for lam in (0.5, 0.3 + 0.4j, -0.2 + 0.7j):
        rep = nondegeneracy_check(plan, lam)
        assert rep.nondegenerate and rep.root_condition > 1e-3


@pytest.mark.parametrize("k,r", [(2, 2), (2, 4), (2, 6), (3, 2), (3, 4)])
def test_block_sdim_closed_form(k, r):
    probs = [Fraction(1, 2), Fraction(1, 2)] if k == 2 else [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)]
    plan = DisintegrationPlan(tuple(range(k)), tuple(probs), (1,) * k, r=r)
    lam = 0.3 + 0.5j
    with mpmath.workdps(50):
        direct = model_sdim(build_block_model(plan, lam, budget=10**7), dps=50)
        closed = block_sdim_closed_form(plan, lam, dps=50)
        assert abs(direct - closed) < 1e-12


def test_block_sdim_ratio_approaches_one():
    plan = lambda r: DisintegrationPlan((0, 1), ("1/2", "1/2"), (1, 1), r=r)
    lam = 0.5 + 0.3j
    ratios = [float(block_sdim_closed_form(plan(r), lam) / similarity_dimension_mp(plan(r), lam)) for r in (2, 4, 8, 12)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    # H(q) <= log2(r+1) for k = 2, so the ratio is at least 1 - log2(r+1)/r
    for r, q in zip((2, 4, 8, 12), ratios):
        assert q >= 1 - np.log2(r + 1) / r - 1e-12


def test_delta_comparison():
    lam = 0.45 + 0.3j
    _, two = split_model(PLAN, lam, 2)
    checked = 0
    for seed in range(6):
        omega = build_block_model(PLAN, lam, seed=seed).omega(4)
        fo = regroup(omega, 2)
        for n in (1, 2):
            size = int(np.prod([two.k(c) for c in fo[:n]]))
            if size <= 1:
                continue  # the comparison needs more than one word
            dd, base = delta_comparison(PLAN, lam, omega[: 2 * n], 2)
            assert dd >= base - 1e-12
            checked += 1
    assert checked >= 4
