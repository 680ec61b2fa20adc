"""How fast truncated Fourier expansions of a symbol converge, past the K=16 mark."""
import argparse
from dataclasses import dataclass, field

from marcin_lab import symbols as sy
from marcin_lab.reporting import emit


@dataclass
class ResynthConfig:
    family: str = "log_theta"
    param: float = 2.0
    Ks: list = field(default_factory=lambda: [0, 4, 8, 16, 24, 32, 48, 64])
    j_lo: int = -2
    j_hi: int = 2
    per_octave: int = 16
    out: str = "runs/resynth"


def main(cfg: ResynthConfig):
    sigma = sy.marcinkiewicz_symbol(cfg.family, cfg.param)
    reps = sy.resynthesis_errors(sigma, cfg.Ks, js=range(cfg.j_lo, cfg.j_hi + 1), per_octave=cfg.per_octave)
    for r in reps:
        print(f"K={r.K:>3}  sup error {r.sup_error:.4g} at {r.worst_point}")
    rows = [[r.K, r.sup_error, r.samples] for r in reps]
    print("wrote", emit(cfg.out, "resynthesis", ["K", "sup_error", "samples"], rows))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, nargs="+", default=ResynthConfig().Ks)
    ap.add_argument("--j-lo", type=int, default=-2)
    ap.add_argument("--j-hi", type=int, default=2)
    a = ap.parse_args()
    main(ResynthConfig(Ks=a.K, j_lo=a.j_lo, j_hi=a.j_hi))
