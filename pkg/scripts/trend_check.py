"""Optimized vs uniform and joint vs pct-only on shared desk-scale drops.

Prints per-scheme 95%-likely SE and the gain ratios.

    python3 scripts/trend_check.py --drops 50
"""

import argparse
from dataclasses import dataclass

import numpy as np

from cellfree_otfs import SystemConfig
from cellfree_otfs.channel_model import generate_drop
from cellfree_otfs.harness import cdf_stats, drop_seed, solve_scheme

SCHEMES = ("SP_joint", "SP_pct_only", "uniform_SP", "EP", "uniform_EP")


@dataclass
class TrendRecipe:
    M_a: int = 30
    K_u: int = 8
    drops: int = 50
    seed: int = 2024
    correlated: bool = True


def run(recipe: TrendRecipe) -> dict[str, float]:
    cfg = SystemConfig(M_a=recipe.M_a, K_u=recipe.K_u, correlated=recipe.correlated)
    samples: dict[str, list[np.ndarray]] = {s: [] for s in SCHEMES}
    for d in range(recipe.drops):
        _, ls = generate_drop(cfg, drop_seed(recipe.seed, d))
        for s in SCHEMES:
            se, sol = solve_scheme(ls, cfg, s)
            if sol.status.value != "Infeasible":
                samples[s].append(se)
    return {s: cdf_stats(np.concatenate(v)).se95 for s, v in samples.items() if v}


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--drops", type=int, default=TrendRecipe.drops)
    ap.add_argument("--seed", type=int, default=TrendRecipe.seed)
    ap.add_argument("--uncorrelated", action="store_true")
    a = ap.parse_args()
    se95 = run(TrendRecipe(drops=a.drops, seed=a.seed, correlated=not a.uncorrelated))
    for s, v in se95.items():
        print(f"{s:>12}: se95 = {v:.4g} bit/s/Hz")
    print(f"SP optimized / uniform: {se95['SP_joint'] / se95['uniform_SP']:.2f}")
    print(f"SP joint / pct-only:    {se95['SP_joint'] / se95['SP_pct_only']:.2f}")
    if "EP" in se95:
        print(f"EP optimized / uniform: {se95['EP'] / se95['uniform_EP']:.2f}")
