#!/usr/bin/env python3
"""Exceptional parameters for the transversality argument, at a coarse grid.

A theta in the annulus 1.1 <= |theta| <= 2, Im theta > 0.05 is bad at scale M
when some tau leaves fewer than delta M of the scales with a coordinate at
distance rho or more from the integers. At rho = 0.1 nothing is bad; at
rho = 0.35 the bad set is large for M = 8 and thins out as M grows.
"""
from __future__ import annotations

import numpy as np

from ssmlab.badset import bad_set_scan
from ssmlab.ek import Annulus, compute_constants, ek_trace, random_blocks

ANN = Annulus(1.1, 2.0, 0.05)


def main():
    blocks = random_blocks(np.random.default_rng(7), 17)
    print("block lengths:", [len(b) for b in blocks])
    for rho, delta in [(0.1, 0.2), (0.35, 0.3)]:
        fr = [bad_set_scan(blocks[: M + 1], {1: 1, 2: 1}, rho, delta, ANN, grid_size=40).bad_fraction
              for M in (8, 12, 16)]
        print(f"rho {rho}, delta {delta}: bad fraction at M = 8, 12, 16:", " ".join(f"{f:.4f}" for f in fr))

    const = compute_constants(ANN, {1: 1, 2: 1})
    print(f"constants: C3 {const.C3:.2f}, C4 {const.C4:.1f}, thresholds n1..n3 = {const.n1}, {const.n2}, {const.n3}")
    tr = ek_trace(1 + 1j, {1: 1, 2: 1}, blocks[:6], 1)
    print("exact trace at theta = 1 + i, first rows of K:", tr.K[:2])


if __name__ == "__main__":
    main()
