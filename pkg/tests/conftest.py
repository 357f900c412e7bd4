from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from ssmlab.ifs import IFS
from ssmlab.measure import DiscreteMeasure


def grid_measure(n: int) -> DiscreteMeasure:
    """Uniform on the 4^n level-n grid of [0,1)^2 (lower-left cell corners)."""
    k = 2**n
    i = np.arange(k) / k
    X, Y = np.meshgrid(i, i)
    return DiscreteMeasure.uniform((X + 1j * Y).ravel())


def centred_grid(n: int) -> DiscreteMeasure:
    k = 2**n
    i = (np.arange(k) + 0.5) / k
    X, Y = np.meshgrid(i, i)
    return DiscreteMeasure.uniform((X + 1j * Y).ravel())


def segment_measure(n: int) -> DiscreteMeasure:
    """Uniform on 2^n points of the horizontal segment [0,1) x {0}."""
    k = 2**n
    return DiscreteMeasure.uniform((np.arange(k) + 0.5) / k + 0j)


def corners() -> DiscreteMeasure:
    return DiscreteMeasure.uniform([0, 1, 1j, 1 + 1j])


HALF = IFS.from_lists(0.5, [0, 1])
TWINDRAGON = IFS.from_lists((1 + 1j) / 2, [0, 1])
FOUR_CORNER = IFS.from_lists(0.5, [0, 0.5, 0.5j, 0.5 + 0.5j], [Fraction(1, 2), Fraction(1, 6), Fraction(1, 6), Fraction(1, 6)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
