"""95%-likely SE versus number of users, with the EP cutoff.

    python3 scripts/fig2_users.py --drops 20 --out results/fig2
"""

import argparse
import json
import sys
import tempfile
from dataclasses import dataclass

from cellfree_otfs.cli import main


@dataclass
class Fig2Recipe:
    M_a: int = 30
    ku: str = "2,4,8,12,16,18,19,20"
    drops: int = 20
    seed: int = 2
    workers: int = 1
    out: str = "results/fig2"

    def argv(self) -> list[str]:
        cfg = {"base": {"M_a": self.M_a}, "n_drops": self.drops, "seed": self.seed}
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(cfg, fh)
        return ["fig2", "--config", fh.name, "--ku", self.ku, "--parallel", str(self.workers),
                "--out", self.out]


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ma", type=int, default=Fig2Recipe.M_a)
    ap.add_argument("--ku", default=Fig2Recipe.ku)
    ap.add_argument("--drops", type=int, default=Fig2Recipe.drops)
    ap.add_argument("--seed", type=int, default=Fig2Recipe.seed)
    ap.add_argument("--workers", type=int, default=Fig2Recipe.workers)
    ap.add_argument("--out", default=Fig2Recipe.out)
    a = ap.parse_args()
    sys.exit(main(Fig2Recipe(a.ma, a.ku, a.drops, a.seed, a.workers, a.out).argv()))
