from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssmlab.entropy import (
    ComponentEntropy,
    Dyadic,
    EmptyComponentError,
    JoinPartition,
    LineDirection,
    LinePartition,
    PartitionError,
    X_AXIS,
    Y_AXIS,
    component,
    component_expectation,
    conditional_entropy,
    convolve,
    entropy,
    normalized_entropy,
    project,
    tube_frostman_statistic,
)
from ssmlab.ifs import BudgetError
from ssmlab.measure import DiscreteMeasure, compare_measures, mixture

from conftest import corners, grid_measure, segment_measure


# DiscreteMeasure ---------------------------------------------------------------

def test_measure_merges_close_atoms_exactly():
    mu = DiscreteMeasure.from_weights([0, 1e-12, 1], ["1/3", "1/3", "1/3"])
    assert len(mu) == 2
    assert mu.weights == [Fraction(2, 3), Fraction(1, 3)]


def test_measure_rejects_bad_weights():
    with pytest.raises(ValueError):
        DiscreteMeasure.from_weights([0, 1], ["1/2", "1/3"])
    with pytest.raises(ValueError):
        DiscreteMeasure.from_weights([0, 1], ["1", "0"])
    with pytest.raises(ValueError):
        DiscreteMeasure.from_weights([], [])


def test_csv_and_binary_round_trip_bit_exactly():
    mu = DiscreteMeasure.from_weights([0.1 + 0.7j, -3.25, 1e-3j], ["1/7", "2/7", "4/7"])
    for back in (DiscreteMeasure.from_csv(mu.to_csv()), DiscreteMeasure.from_bytes(mu.to_bytes())):
        assert back.atoms.tobytes() == mu.atoms.tobytes()
        assert back.weights == mu.weights


def test_mixture_weights():
    mu = mixture([(Fraction(1, 3), DiscreteMeasure.dirac(0)), (Fraction(2, 3), DiscreteMeasure.dirac(1))])
    assert mu.weights == [Fraction(1, 3), Fraction(2, 3)]


# entropy -------------------------------------------------------------------------

@pytest.mark.parametrize("n", [0, 1, 5, 40])
def test_entropy_point_mass(n):
    assert entropy(DiscreteMeasure.dirac(0.3 + 0.1j), n) == 0


def test_entropy_four_cells():
    mu = DiscreteMeasure.uniform([0, 0.5, 0.5j, 0.5 + 0.5j])
    assert entropy(mu, 1) == 2.0


@pytest.mark.parametrize("n", [1, 3, 6])
def test_entropy_grid(n):
    assert entropy(grid_measure(n), n) == pytest.approx(2 * n, abs=1e-12)


def test_level_bounds():
    with pytest.raises(PartitionError):
        entropy(DiscreteMeasure.dirac(0), -1)
    with pytest.raises(PartitionError):
        entropy(DiscreteMeasure.dirac(0), LinePartition(61, X_AXIS))


def test_dyadic_levels_past_the_integer_cap_use_atom_cells():
    mu = DiscreteMeasure.from_weights([0, 1e-6, 0.5j], ["1/2", "1/4", "1/4"])
    assert entropy(mu, 61) == entropy(mu, 200) == pytest.approx(1.5)
    assert conditional_entropy(mu, 64, 60) == 0
    assert conditional_entropy(mu, 64, 10) == pytest.approx(entropy(mu, 60) - entropy(mu, 10))


def test_conditional_entropy_examples():
    mu = grid_measure(4)
    assert conditional_entropy(mu, 3, 3) == 0
    assert conditional_entropy(mu, 2, 1) == pytest.approx(2.0, abs=1e-12)
    prod = DiscreteMeasure.uniform([0, 0.5])
    assert conditional_entropy(prod, LinePartition(1, X_AXIS), LinePartition(1, Y_AXIS)) == pytest.approx(1.0)


def test_conditional_entropy_mismatched_levels():
    with pytest.raises(PartitionError):
        conditional_entropy(grid_measure(2), Dyadic(1), Dyadic(3))


@pytest.mark.parametrize("n,m", [(1, 2), (3, 2), (2, 5)])
def test_chain_rule(n, m):
    rng = np.random.default_rng(n * 7 + m)
    mu = DiscreteMeasure.from_weights(rng.random(50) + 1j * rng.random(50), [Fraction(int(w), 1000) for w in _split(1000, 50, rng)])
    lhs = entropy(mu, n + m)
    rhs = entropy(mu, n) + conditional_entropy(mu, Dyadic(n + m), Dyadic(n))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def _split(total, k, rng):
    cuts = np.sort(rng.choice(np.arange(1, total), k - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [total]]))


def test_components():
    z = 0.3 + 0.7j
    c = component(DiscreteMeasure.dirac(z), 3, (2, 5), rescaled=True)
    assert len(c) == 1 and c.weights == [1]
    assert abs(c.atoms[0] - (8 * z - (2 + 5j))) < 1e-15
    raw = component(corners(), 1, (0, 0))
    assert raw.atoms.tolist() == [0j] and raw.weights == [1]
    sub = component(grid_measure(2), 1, (1, 0), rescaled=True)
    assert compare_measures(sub, grid_measure(1)).equal
    with pytest.raises(EmptyComponentError):
        component(corners(), 1, (1, 1))


def test_component_expectation_examples():
    mu = grid_measure(6)
    assert component_expectation(mu, range(0, 3), lambda c: 1.0) == pytest.approx(1.0)
    assert component_expectation(DiscreteMeasure.dirac(0), range(0, 4), ComponentEntropy(2)) == 0
    assert component_expectation(mu, range(0, 6 - 2 + 1), ComponentEntropy(2)) == pytest.approx(2.0, abs=1e-12)
    # the shortcut agrees with building every component
    direct = component_expectation(mu, range(0, 3), lambda c: normalized_entropy(c, 2))
    assert direct == pytest.approx(component_expectation(mu, range(0, 3), ComponentEntropy(2)), abs=1e-12)


def test_projection_examples():
    p = project(corners(), X_AXIS)
    assert compare_measures(p, DiscreteMeasure.uniform([0, 1])).equal
    assert entropy(p, 1) == 1.0
    z = 0.4 - 0.2j
    w = LineDirection(0.7)
    assert abs(project(DiscreteMeasure.dirac(z), w).atoms[0] - (z.real * math.cos(0.7) + z.imag * math.sin(0.7))) < 1e-15


@pytest.mark.parametrize("angle", [0.0, 0.3, math.pi / 2, 2.0])
def test_projection_entropy_equals_line_partition(angle):
    rng = np.random.default_rng(3)
    mu = DiscreteMeasure.uniform(rng.random(200) + 1j * rng.random(200))
    w = LineDirection(angle)
    for m in (1, 4, 8):
        assert entropy(project(mu, w), m) == pytest.approx(entropy(mu, LinePartition(m, w)), abs=1e-12)


def test_convolution_examples():
    assert compare_measures(convolve(DiscreteMeasure.dirac(1j), DiscreteMeasure.dirac(2)), DiscreteMeasure.dirac(2 + 1j)).equal
    coin = DiscreteMeasure.uniform([0, 1])
    two = convolve(coin, coin)
    assert two.weights == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]
    mu = DiscreteMeasure.from_weights([0, 0.3 + 0.2j], ["1/3", "2/3"])
    nu = DiscreteMeasure.from_weights([0.05j, 0.6], ["1/2", "1/2"])
    conv = convolve(mu, nu)
    for n in range(0, 8):
        assert entropy(conv, n) >= max(entropy(mu, n), entropy(nu, n)) - 1e-12


def test_convolution_budget():
    with pytest.raises(BudgetError):
        convolve(grid_measure(5), grid_measure(5), budget=1000)


def test_tube_statistic_examples():
    stat = tube_frostman_statistic(grid_measure(6), [2.0**-j for j in (2, 3, 4)], directions=16)
    for r, m in stat:
        assert r <= m <= 4 * r
    assert all(m == 1 for _, m in tube_frostman_statistic(segment_measure(5), [0.01, 0.1], directions=16))
    assert all(m == 1 for _, m in tube_frostman_statistic(DiscreteMeasure.dirac(0), [0.01, 0.1], directions=8))
    with pytest.raises(ValueError):
        tube_frostman_statistic(corners(), [0.1], directions=4)


def test_similarity_changes_entropy_by_bounded_amount():
    rng = np.random.default_rng(8)
    mu = DiscreteMeasure.uniform(rng.random(300) * 4 + 1j * rng.random(300) * 4)
    for k in (1, 2, 3):
        f = mu.map_atoms(2.0**-k, 0.37 + 0.11j)
        for n in (2, 5, 9):
            assert abs(entropy(mu, n) - entropy(f, n + k)) <= 2 * math.log2(9)


def test_entropy_given_line_is_at_most_one_per_level():
    rng = np.random.default_rng(9)
    mu = DiscreteMeasure.uniform(rng.random(2000) + 1j * rng.random(2000))
    for n in (4, 8):
        for a in (0.0, 0.4, 1.3):
            w = LineDirection(a)
            h = conditional_entropy(mu, JoinPartition(n, w), LinePartition(n, w))
            assert h / n <= 1 + 3 / n


@pytest.mark.parametrize("n", [16, 32, 64])
@pytest.mark.parametrize("m", [2, 4])
def test_local_to_global_entropy(n, m):
    # grid with atom spacing 2^-8: uniform components up to level 8, then single atoms
    mu = grid_measure(8)
    global_h = normalized_entropy(mu, n)
    local = component_expectation(mu, range(0, n + 1), ComponentEntropy(m))
    assert abs(global_h - local) <= 4 * (m + 1) / n


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.integers(1, 20)), min_size=1, max_size=12),
       st.integers(0, 12))
def test_entropy_bounded_by_atom_entropy(items, n):
    atoms = [complex(x, y) for x, y, _ in items]
    tot = sum(w for _, _, w in items)
    mu = DiscreteMeasure.from_weights(atoms, [Fraction(w, tot) for _, _, w in items])
    h = entropy(mu, n)
    assert -1e-12 <= h <= mu.entropy_of_atoms() + 1e-12
