"""Operator norms of Delta_k LP_j and of V_r on one periodic grid, with successive ratios."""
import argparse
from dataclasses import dataclass

from marcin_lab import harmonic as hm
from marcin_lab.reporting import emit


@dataclass
class DecayConfig:
    M: int = 1024
    L: float = 2.0
    k: int = 0
    r_max: int = 5
    out: str = "runs/decay"


def main(cfg: DecayConfig):
    grid = hm.PeriodicGrid(cfg.M, cfg.L)
    rows, prev = [], {}
    for j in range(1, 6):
        v = hm.cross_norm("mart_then_lp", grid, k=cfg.k, j=j).value
        rows.append(["mart_then_lp", j, v, v / prev["lp"] if "lp" in prev else float("nan")])
        prev["lp"] = v
    for sign in (1, -1):
        last = None
        for r in range(1, cfg.r_max + 1):
            v = hm.cross_norm("v_r", grid, r=sign * r).value
            rows.append(["v_r", sign * r, v, v / last if last else float("nan")])
            last = v
    for row in rows:
        print("{:>13} {:>3}  norm {:.6f}  ratio {:.4f}".format(*row))
    print("wrote", emit(cfg.out, "decay", ["operator", "index", "norm", "ratio_to_previous"], rows))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=1024)
    ap.add_argument("--L", type=float, default=2.0)
    ap.add_argument("--out", default=DecayConfig.out)
    a = ap.parse_args()
    main(DecayConfig(M=a.M, L=a.L, out=a.out))
