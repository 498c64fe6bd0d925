"""Per-user SE CDFs for every scheme, correlated and uncorrelated shadowing.

Qualitative desk-scale reproduction; writes fig1_cdf.csv and fig1_summary.csv.

    python3 scripts/fig1_cdf.py --drops 50 --out results/fig1
"""

import argparse
import sys
from dataclasses import dataclass

from cellfree_otfs.cli import main


@dataclass
class Fig1Recipe:
    M_a: int = 30
    K_u: int = 8
    drops: int = 50
    seed: int = 1
    workers: int = 1
    out: str = "results/fig1"

    def argv(self) -> list[str]:
        import json
        import tempfile

        cfg = {"base": {"M_a": self.M_a, "K_u": self.K_u}, "n_drops": self.drops, "seed": self.seed}
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(cfg, fh)
        return ["fig1", "--config", fh.name, "--parallel", str(self.workers), "--out", self.out]


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ma", type=int, default=Fig1Recipe.M_a)
    ap.add_argument("--ku", type=int, default=Fig1Recipe.K_u)
    ap.add_argument("--drops", type=int, default=Fig1Recipe.drops)
    ap.add_argument("--seed", type=int, default=Fig1Recipe.seed)
    ap.add_argument("--workers", type=int, default=Fig1Recipe.workers)
    ap.add_argument("--out", default=Fig1Recipe.out)
    a = ap.parse_args()
    sys.exit(main(Fig1Recipe(a.ma, a.ku, a.drops, a.seed, a.workers, a.out).argv()))
