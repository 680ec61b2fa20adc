"""Explicit matrices with known behaviour of h(A).

The sign matrix lists every +-1 pattern of length N as a row, scaled by
N^-theta.  Against f = r_1 + ... + r_N (so |Delta_k f| = 1) some row matches
the signs of every Delta_k f at every point, giving max_j |row_j| = N^(1-theta)
everywhere while ||f||_2 = sqrt(N).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .dyadic import DyadicSpace, SampleVector, lp_norm, rademacher
from .lorentz import WeightSequence
from .matrices import Matrix

SIGN_MATRIX_MAX_N = 20
VERIFY_MAX_N = 14


def sign_patterns(N: int) -> np.ndarray:
    """All 2**N sign rows in binary counting order, first column most significant."""
    rows = np.arange(1 << N)[:, None]
    bits = (rows >> (N - 1 - np.arange(N))[None, :]) & 1
    return 1.0 - 2.0 * bits


def sign_matrix(N: int, theta: float) -> Matrix:
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > SIGN_MATRIX_MAX_N:
        raise OverflowError(f"N={N} exceeds the allocation guard {SIGN_MATRIX_MAX_N}")
    return Matrix(sign_patterns(N) * float(N) ** (-theta))


def rademacher_witness(space: DyadicSpace) -> SampleVector:
    vals = sum((rademacher(space.levels, k) for k in range(1, space.levels + 1)),
               np.zeros(space.size))
    return SampleVector(space, vals)


@dataclass
class CounterexampleReport:
    N: int
    theta: float
    rows: int
    cols: int
    ratio: float
    target: float
    exact_match: bool

    CSV_FIELDS = ("N", "theta", "ratio", "target", "match")

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def csv_row(self) -> list:
        return [self.N, self.theta, repr(self.ratio), repr(self.target), int(self.exact_match)]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_FIELDS)
        w.writerow(self.csv_row())
        return buf.getvalue()


def verify_counterexample(N: int, theta: float, chunk: int = 512) -> CounterexampleReport:
    """Evaluate the sign matrix at the Rademacher witness, rows in chunks."""
    if N > VERIFY_MAX_N:
        raise OverflowError(f"N={N} exceeds the evaluation budget {VERIFY_MAX_N}")
    A = sign_matrix(N, theta)
    space = DyadicSpace(N)
    f = rademacher_witness(space)
    diffs = np.stack([rademacher(N, k) for k in range(1, N + 1)])  # Delta_k f = r_k
    F = np.zeros(space.size)
    for start in range(0, A.rows, chunk):
        block = A.entries[start:start + chunk].real @ diffs
        np.maximum(F, np.abs(block).max(axis=0), out=F)
    ratio = float(lp_norm(F, 2) / f.norm(2))
    target = float(N) ** (0.5 - theta)
    match = math.isclose(ratio, target, rel_tol=1e-9, abs_tol=1e-9)
    return CounterexampleReport(N, float(theta), A.rows, A.cols, ratio, target, match)


def band_matrix(w: WeightSequence, size: int) -> Matrix:
    """a_jk = w_{|j-k|+1}."""
    if size < 1:
        raise ValueError("size must be >= 1")
    if size > len(w):
        raise ValueError(f"need {size} weights, only {len(w)} materialized")
    j = np.arange(size)
    return Matrix(w.values[np.abs(j[:, None] - j[None, :])])
