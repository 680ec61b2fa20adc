"""Estimated H for the sign family next to N^(1/2-theta), plus the band family.

    python scripts/growth_table.py --max-n 6 --out runs/growth
"""
import argparse
from dataclasses import dataclass, field

from marcin_lab.counterexamples import band_matrix, sign_matrix
from marcin_lab.lorentz import make_weight
from marcin_lab.maximal import estimate_h
from marcin_lab.reporting import emit


@dataclass
class GrowthConfig:
    max_n: int = 6
    thetas: list = field(default_factory=lambda: [0.0, 0.25, 0.4])
    band_kind: str = "log"
    band_param: float = 2.0
    band_sizes: range = range(4, 13)
    restarts: int = 4
    seed: int = 0
    out: str = "runs/growth"


def main(cfg: GrowthConfig):
    rows = []
    for theta in cfg.thetas:
        for N in range(2, cfg.max_n + 1):
            est = estimate_h(sign_matrix(N, theta), restarts=cfg.restarts, seed=cfg.seed)
            rows.append(["sign", theta, N, est.lower_bound, N ** (0.5 - theta)])
            print(f"sign theta={theta} N={N}: {est.lower_bound:.6f}  (N^(1/2-theta) = {N ** (0.5 - theta):.6f})")
    w = make_weight(cfg.band_kind, cfg.band_param, max(cfg.band_sizes))
    for n in cfg.band_sizes:
        est = estimate_h(band_matrix(w, n), restarts=cfg.restarts, seed=cfg.seed)
        rows.append(["band", cfg.band_param, n, est.lower_bound, float("nan")])
        print(f"band size={n}: {est.lower_bound:.6f}")
    path = emit(cfg.out, "growth", ["family", "param", "size", "h_estimate", "reference"], rows)
    print("wrote", path)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=GrowthConfig.max_n)
    ap.add_argument("--restarts", type=int, default=GrowthConfig.restarts)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=GrowthConfig.out)
    a = ap.parse_args()
    main(GrowthConfig(max_n=a.max_n, restarts=a.restarts, seed=a.seed, out=a.out))
