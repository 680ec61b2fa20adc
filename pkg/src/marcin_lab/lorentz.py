"""Decreasing weights, the Lorentz sequence norms d(w) and d*(w), and the
column functional that controls h(A) up to a constant."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .matrices import Matrix

_KINDS = {"log": "log", "log_theta": "log", "loglog": "loglog", "loglog_theta": "loglog",
          "explicit": "explicit"}


@dataclass(frozen=True, eq=False)
class WeightSequence:
    kind: str
    theta: float | None
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel().copy()
        if v.size == 0:
            raise ValueError("weight sequence is empty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weights must be finite and strictly positive")
        if np.any(np.diff(v) > 0):
            raise ValueError("weights must be non-increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __getitem__(self, k: int) -> float:
        """1-based access, w[1] = w_1."""
        if not 1 <= k <= len(self):
            raise IndexError(f"weight index {k} outside 1..{len(self)}")
        return float(self.values[k - 1])

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            return {"kind": "explicit", "values": self.values.tolist()}
        return {"kind": self.kind, "theta": self.theta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def make_weight(kind: str, theta: float | None = None, length: int = 1, values=None) -> WeightSequence:
    """log:    w_k = log2(k+1)^-theta
    loglog: w_k = log2(k+1)^-1 * log2(max(log2(k+2), 1))^-theta
    explicit: the given values (checked for positivity and monotonicity)."""
    try:
        kind = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown weight kind {kind!r}") from None
    if kind == "explicit":
        if values is None:
            raise ValueError("explicit weights need values")
        return WeightSequence("explicit", theta, values)
    if theta is None or theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    k = np.arange(1, length + 1, dtype=float)
    if kind == "log":
        w = np.log2(k + 1) ** (-theta)
    else:
        inner = np.maximum(np.log2(k + 2), 1.0)
        w = np.log2(k + 1) ** -1.0 * np.log2(inner) ** (-theta)
    return WeightSequence(kind, float(theta), w)


def weight_from_dict(d: dict, length: int) -> WeightSequence:
    if d.get("kind") == "explicit":
        return make_weight("explicit", d.get("theta"), values=d["values"])
    return make_weight(d["kind"], float(d["theta"]), length)


def weight_from_json(text: str, length: int) -> WeightSequence:
    return weight_from_dict(json.loads(text), length)


@dataclass
class ConditionReport:
    cdn1_ratio_bound: float
    cdn2_partial_sum: float
    block_sums: list
    decay_exponent: float
    flags: dict


def check_conditions(w: WeightSequence, horizon: int, theta: float | None = None,
                     samples: int = 200) -> ConditionReport:
    """Finite-horizon diagnostics for the two weight conditions.

    cdn1: the largest w_k (log(k+1)/log(j+1))^theta / w_j over j <= k sampled
    on a geometric grid, an empirical constant C.
    cdn2: the partial sum of w_k / k.  Dyadic-block sums of w_k / k always
    shrink for a decreasing weight, so the ratio of consecutive block sums
    alone cannot tell convergence apart.  The flag instead fits a power law
    b_m ~ m^-s to the later block sums and reports convergence when s > 1,
    the threshold for summability of m^-s.
    """
    if not 1 <= horizon <= len(w):
        raise ValueError(f"horizon {horizon} outside 1..{len(w)}")
    theta = theta if theta is not None else (w.theta if w.theta is not None else 1.0)
    v = w.values[:horizon]
    idx = np.unique(np.geomspace(1, horizon, num=min(samples, horizon)).astype(int))
    lg = np.log2(idx + 1.0)
    wj, wk = v[idx - 1][:, None], v[idx - 1][None, :]
    ratio = wk * (lg[None, :] / lg[:, None]) ** theta / wj
    c1 = float(np.max(np.where(idx[None, :] >= idx[:, None], ratio, 0)))

    k = np.arange(1, horizon + 1)
    terms = v / k
    blocks = np.bincount(np.floor(np.log2(k)).astype(int), weights=terms)
    full = blocks[: int(np.log2(horizon + 1))]  # drop a trailing partial block
    ratios = full[1:] / full[:-1] if full.size > 1 else np.array([])
    slope = float("nan")
    tail = np.arange(1, full.size + 1)[full.size // 2:]
    if tail.size >= 2:
        slope = float(-np.polyfit(np.log(tail), np.log(full[tail - 1]), 1)[0])
    flags = {
        "cdn1_bounded": bool(np.isfinite(c1)),
        "cdn2_blocks_decreasing": bool(ratios.size and np.all(ratios < 1)),
        "cdn2_converges": bool(slope > 1) if np.isfinite(slope) else False,
    }
    return ConditionReport(c1, float(terms.sum()), full.tolist(), slope, flags)


def _rearranged(u) -> np.ndarray:
    return np.sort(np.abs(np.asarray(u, dtype=complex)).ravel())[::-1]


def _check_length(n: int, w: WeightSequence):
    if n > len(w):
        raise ValueError(f"sequence of length {n} exceeds the {len(w)} materialized weights")


def d_norm(u, w: WeightSequence) -> float:
    """sum_k w_k u*_k (largest |u| meets largest weight)."""
    a = _rearranged(u)
    _check_length(a.size, w)
    return float(np.dot(w.values[: a.size], a))


def d_star_norm(v, w: WeightSequence) -> float:
    """max_k (v*_1 + ... + v*_k) / (w_1 + ... + w_k)."""
    a = _rearranged(v)
    _check_length(a.size, w)
    if a.size == 0:
        return 0.0
    return float(np.max(np.cumsum(a) / np.cumsum(w.values[: a.size])))


@dataclass
class LorentzBound:
    column: float
    crude: float


def lorentz_column_bound(A: Matrix, w: WeightSequence) -> LorentzBound:
    """max over columns of the d* norm, and max |a_jk| / w_{|j-k|+1}.

    Both are bound functionals without their (unspecified) constant.
    """
    if A.entries.size == 0:
        return LorentzBound(0.0, 0.0)
    _check_length(A.rows, w)
    column = max(d_star_norm(A.entries[:, c], w) for c in range(A.cols))
    j, k = np.meshgrid(A.row_indices(), A.col_indices(), indexing="ij")
    gap = np.abs(j - k) + 1
    _check_length(int(gap.max()), w)
    crude = float(np.max(np.abs(A.entries) / w.values[gap - 1]))
    return LorentzBound(float(column), crude)
