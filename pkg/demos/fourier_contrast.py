#!/usr/bin/env python3
"""Fourier decay of Bernoulli convolutions: a smooth case, a Pisot case and a generic case.

lambda = 1/2 gives the uniform measure on [0, 2], whose transform decays like |xi|^-1.
lambda = 1/phi is a Pisot reciprocal: along xi = phi^n the transform does not decay.
lambda = 0.6 is not, and the same sampling (xi = 0.6^-n) decays quickly.
"""
from __future__ import annotations

import numpy as np

from ssmlab.fourier import decay_exponent, fourier
from ssmlab.ifs import IFS, self_similar_truncation

PHI = (1 + 5**0.5) / 2


def main():
    uniform = self_similar_truncation(IFS.from_lists(0.5, [0, 1]), 16)
    fit = decay_exponent(uniform, (1, 8))
    print(f"uniform on [0, 2]: fitted sigma {fit.sigma:.4f} over bands 2..2^8")

    for lam, name in [(1 / PHI, "golden"), (0.6, "lambda 0.6")]:
        mu = self_similar_truncation(IFS.from_lists(lam, [0, 1]), 19)
        vals = np.abs(fourier(mu, [lam**-n for n in range(1, 13)]))
        print(f"{name:>11}: |mu^(lambda^-n)|, n = 1..12")
        print("   ", " ".join(f"{v:.1e}" for v in vals))
    print("the golden values settle near 0.0066 while the generic ones keep shrinking")


if __name__ == "__main__":
    main()
