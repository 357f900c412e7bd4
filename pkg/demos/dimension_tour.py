#!/usr/bin/env python3
"""Entropy dimension of two planar self-similar measures, plus a rendered tile.

The four-corner measure satisfies the open set condition, so its normalised
dyadic entropy equals H(p) = 1.79248 bits at every level. The twindragon
(lambda = (1+i)/2, two maps) has similarity dimension exactly 2; its entropy
stays above 2 at coarse levels because the tile overhangs the unit square.
"""
from __future__ import annotations

from pathlib import Path

from ssmlab.dimension import entropy_dimension_curve
from ssmlab.ifs import IFS, self_similar_truncation, similarity_dimension
from ssmlab.render import occupancy_fraction, render_measure

OUT = Path(__file__).resolve().parent / "out"


def main():
    corners = IFS.from_lists(0.5, [0, 0.5, 0.5j, 0.5 + 0.5j], ["1/2", "1/6", "1/6", "1/6"])
    twindragon = IFS.from_lists(0.5 + 0.5j, [0, 1])

    mu = self_similar_truncation(corners, 10, budget=2_000_000)
    rep = entropy_dimension_curve(mu, range(2, 11))
    print(f"four corners: sdim {similarity_dimension(corners):.5f}")
    for n, h in zip(rep.levels, rep.entropies):
        print(f"  level {n:2d}  H_n = {h:.5f}")

    tile = self_similar_truncation(twindragon, 18)
    rep = entropy_dimension_curve(tile, range(2, 9))
    print(f"twindragon: sdim {similarity_dimension(twindragon):.5f}, slope of H curve {rep.slope:.4f}")
    print("  H_n:", " ".join(f"{h:.3f}" for h in rep.entropies))

    OUT.mkdir(exist_ok=True)
    (OUT / "twindragon.png").write_bytes(render_measure(tile, 512))
    print(f"  wrote {OUT / 'twindragon.png'}; occupancy of bounding box {occupancy_fraction(tile, 512):.3f}")


if __name__ == "__main__":
    main()
