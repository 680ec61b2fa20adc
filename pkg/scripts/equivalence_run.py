"""H(A) next to a multiplier certificate for sigma_A, for sign and diagonal families.

Members whose grid would exceed --max-M are reported as infeasible rather than run.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from marcin_lab import symbols as sy
from marcin_lab.counterexamples import sign_matrix
from marcin_lab.matrices import Matrix
from marcin_lab.reporting import emit


@dataclass
class EquivalenceConfig:
    max_n: int = 4
    theta: float = 0.25
    max_M: int = 1 << 14
    seed: int = 0
    out: str = "runs/equivalence"


def main(cfg: EquivalenceConfig):
    sign = [(f"sign N={N}", sign_matrix(N, cfg.theta)) for N in range(2, cfg.max_n + 1)]
    diag = [(f"diag c={c}", Matrix(np.eye(4) * c)) for c in (0.5, 1.0, 2.0, 4.0)]
    rows = sy.equivalence_experiment(sign + diag, max_M=cfg.max_M, seed=cfg.seed)
    for r in rows:
        print(f"{r.label:>12}  H {r.H_est:.4f}  cert {r.mult_cert:.4f}  ratio {r.ratio:.4f}  M {r.required_M} {r.flags}")
    table = [[getattr(r, f) for f in sy.EquivalenceRow.CSV_FIELDS] for r in rows]
    print("wrote", emit(cfg.out, "equivalence", list(sy.EquivalenceRow.CSV_FIELDS), table))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=4)
    ap.add_argument("--max-M", type=int, default=1 << 14)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    main(EquivalenceConfig(max_n=a.max_n, max_M=a.max_M, seed=a.seed))
