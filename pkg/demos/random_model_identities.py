#!/usr/bin/env python3
"""A random self-similar measure and the exact identities behind it.

Two homogeneous systems are drawn by a Bernoulli selection. The truncated
random measure splits into scaled copies of its shift (dynamic
self-similarity) and into a convolution of a head and a tail. A
block-disintegration plan rewrites a fixed self-similar measure as a random
one over blocks of r maps.
"""
from __future__ import annotations

from pathlib import Path

from ssmlab.config import load_json, model_from_dict, plan_from_dict
from ssmlab.disintegrate import block_sdim_closed_form, build_block_model, similarity_dimension_mp, verify_disintegration, verify_split
from ssmlab.model import model_sdim, eta_truncated, verify_convolution_decomposition, verify_dynamic_self_similarity

CONFIGS = Path(__file__).resolve().parent / "configs"


def main():
    model = model_from_dict(load_json(CONFIGS / "random_model.json"))
    omega = model.omega(8)
    mu = eta_truncated(model, omega)
    print("omega:", "".join(str(s) for s in omega), f"-> {len(mu)} atoms, sdim {float(model_sdim(model)):.4f}")
    print("  dynamic self-similarity:", bool(verify_dynamic_self_similarity(model, omega, 1)))
    print("  convolution decomposition at 4:", bool(verify_convolution_decomposition(model, omega, 4)))

    plan, lam = plan_from_dict(load_json(CONFIGS / "plan.json"))
    print(f"plan with r = {plan.r}, lambda = {lam}")
    print("  disintegration over 2 blocks:", bool(verify_disintegration(plan, lam, 2)))
    block = build_block_model(plan, lam, seed=1)
    print("  split eta = eta' * eta'':", bool(verify_split(plan, lam, block.omega(4), 2)))
    full, sub = similarity_dimension_mp(plan, lam), block_sdim_closed_form(plan, lam)
    print(f"  sdim {float(full):.6f}, block model sdim {float(sub):.6f} (ratio {float(sub / full):.4f})")
    print(f"  block model has {len(block.labels)} systems")


if __name__ == "__main__":
    main()
