from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmlab.ifs import (
    IFS,
    AlphabetError,
    BudgetError,
    CompositionError,
    Similarity,
    as_fraction,
    compose,
    min_separation,
    similarity_dimension,
    support_radius,
    truncated_projection,
    word_points,
)

from conftest import HALF


def test_similarity_rejects_non_contraction():
    with pytest.raises(ValueError):
        Similarity(1.0, 0)
    with pytest.raises(ValueError):
        Similarity(0.0, 0)


def test_similarity_polar_split_reconstructs_lambda():
    g = Similarity(0.3 - 0.4j, 1)
    assert abs(g.r * g.phi - g.lam) < 1e-15


def test_ifs_probabilities_are_exact():
    with pytest.raises(ValueError):
        IFS.from_lists(0.5, [0, 1], ["1/2", "1/3"])
    with pytest.raises(ValueError):
        IFS.from_lists(0.5, [0, 1], ["1", "0"])
    ifs = IFS.from_lists(0.5, [0, 1], ["0.25", "3/4"])
    assert ifs.probs == (Fraction(1, 4), Fraction(3, 4))


def test_as_fraction_forms():
    assert as_fraction("0.1") == Fraction(1, 10)
    assert as_fraction(" 2/6 ") == Fraction(1, 3)
    with pytest.raises(TypeError):
        as_fraction(True)


@pytest.mark.parametrize("word,lam,t", [((2,), 0.5, 1.0), ((1, 2), 0.25, 0.5), ((2, 1), 0.25, 1.0)])
def test_compose_examples(word, lam, t):
    g = compose(HALF, word)
    assert g.lam == lam and g.t == t
    # evaluate the composition by hand at three sample points
    for z in (0.3, -1 + 2j, 5j):
        w = z
        for s in reversed(word):
            w = HALF.maps[s - 1](w)
        assert abs(g(z) - w) < 1e-14


def test_compose_errors():
    with pytest.raises(CompositionError):
        compose(HALF, ())
    with pytest.raises(AlphabetError):
        compose(HALF, (1, 3))


def test_truncated_projection_examples():
    assert truncated_projection(HALF, (2, 2, 2)) == 1 + 0.5 + 0.25
    assert truncated_projection(HALF, (1, 2)) == compose(HALF, (1, 2)).t == 0.5
    odd = IFS.from_lists([0.3j, -0.5], [0, 2 + 1j])
    assert truncated_projection(odd, (1,) * 7) == 0


def test_similarity_dimension_examples():
    assert similarity_dimension(HALF) == 1.0
    assert similarity_dimension(IFS.from_lists(2**-0.5, [0, 1])) == pytest.approx(2.0, abs=1e-15)
    ifs = IFS.from_lists([0.5, 1 / 3], [0, 1], ["3/4", "1/4"])
    with mpmath.workdps(64):
        p = [mpmath.mpf(3) / 4, mpmath.mpf(1) / 4]
        r = [mpmath.mpf(1) / 2, mpmath.mpf(1) / 3]
        oracle = sum(x * mpmath.log(x, 2) for x in p) / sum(x * mpmath.log(y, 2) for x, y in zip(p, r))
    assert similarity_dimension(ifs) == pytest.approx(float(oracle), abs=1e-14)
    assert float(oracle) == pytest.approx(0.7077729637540365, abs=1e-15)


def test_min_separation_examples():
    assert min_separation(HALF, 2) == 0.5
    assert min_separation(IFS.from_lists(0.75, [0, 1]), 2) == pytest.approx(0.25)
    assert min_separation(IFS.from_lists(0.5, [0, 0]), 3) == 0.0


def test_min_separation_budget():
    with pytest.raises(BudgetError):
        min_separation(HALF, 30)


def test_word_points_lexicographic():
    pts = word_points(HALF, 2)
    assert pts.tolist() == [0, 0.5, 1, 1.5]


lams = st.complex_numbers(max_magnitude=0.9, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 0.05)
ts = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@st.composite
def ifs_strategy(draw):
    k = draw(st.integers(1, 3))
    maps = [Similarity(draw(lams), draw(ts)) for _ in range(k)]
    raw = [draw(st.integers(1, 9)) for _ in range(k)]
    tot = sum(raw)
    return IFS(tuple(maps), tuple(Fraction(r, tot) for r in raw))


@settings(max_examples=60, deadline=None)
@given(ifs_strategy(), st.lists(st.integers(1, 3), min_size=1, max_size=5), st.lists(st.integers(1, 3), min_size=1, max_size=5))
def test_compose_is_a_homomorphism(ifs, u, v):
    u = [min(s, ifs.k) for s in u]
    v = [min(s, ifs.k) for s in v]
    gu, gv, guv = compose(ifs, u), compose(ifs, v), compose(ifs, u + v)
    assert abs(guv.lam - gu.lam * gv.lam) <= 1e-12 * max(1, abs(guv.lam))
    assert abs(guv.t - (gu.lam * gv.t + gu.t)) <= 1e-12 * max(1, abs(guv.t))


@settings(max_examples=60, deadline=None)
@given(ifs_strategy(), st.lists(st.integers(1, 3), min_size=1, max_size=12))
def test_projection_within_support_radius(ifs, u):
    u = [min(s, ifs.k) for s in u]
    assert abs(truncated_projection(ifs, u)) <= support_radius(ifs) + 1e-12


@settings(max_examples=30, deadline=None)
@given(ifs_strategy(), st.integers(1, 4), st.integers(0, 3))
def test_min_separation_non_increasing(ifs, n, j):
    if ifs.k ** (n + j) > 4096 or ifs.k == 1:
        return
    assert min_separation(ifs, n + j) <= min_separation(ifs, n) + 1e-15


@settings(max_examples=40, deadline=None)
@given(ifs_strategy(), st.randoms(use_true_random=False))
def test_similarity_dimension_permutation_invariant(ifs, rnd):
    order = list(range(ifs.k))
    rnd.shuffle(order)
    if all(abs(m.lam) == 1 for m in ifs.maps):
        return
    a, b = similarity_dimension(ifs), similarity_dimension(ifs.permuted(order))
    assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)
