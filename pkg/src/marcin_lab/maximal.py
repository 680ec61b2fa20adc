"""Maximal-operator constants h_p(A), weak and mixed variants, H(A) and V_A.

For a matrix A with columns attached to filtration levels, T_A f has rows
``sum_k a_jk Delta_k f`` and the constants compare ``max_j |row_j|`` with f.
Lower bounds come from an explicit witness f (always re-evaluable); upper
bounds come from closed-form functionals that are provably valid.

The estimator works on ``A.compressed()`` with one level per surviving
column.  Zero rows and columns do not change any of the constants, and this
keeps the witness space as small as possible.  Witnesses stored in a
``NormEstimate`` therefore live on ``2**A.compressed().cols`` atoms.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from ._parallel import pmap
from .dyadic import (DyadicSpace, SampleVector, ShapeError, diff_stack, lp_norm,
                     mart_diff, rademacher, weak_lp_norm)
from .matrices import Matrix, lower_triangle, upper_triangle_transposed

ORACLE_LIMIT = 10**6
_DENSE_LIMIT = 256  # largest atom count for which an exact SVD polish is used
_LOCAL_SEARCH_LIMIT = 4096  # atoms * rows budget for single-atom selector moves
_LOCAL_SEARCH_ATOMS = 64
_PAIR_MOVE_LIMIT = 1024  # most two-atom moves worth enumerating
_EPS = 1e-12


@dataclass(frozen=True)
class Mode:
    kind: str = "strong"
    p: float = 2.0
    q: float | None = None

    def __post_init__(self):
        if self.kind not in ("strong", "weak", "mixed"):
            raise ValueError(f"mode must be strong, weak or mixed, got {self.kind!r}")
        if not (0 < self.p < math.inf):
            raise ValueError(f"p must lie in (0, inf), got {self.p}")
        if self.kind == "mixed":
            if self.q is None or not (0 < self.q < self.p):
                raise ValueError(f"mixed mode needs 0 < q < p, got p={self.p}, q={self.q}")
        elif self.q is not None:
            raise ValueError(f"q is only meaningful in mixed mode")

    @property
    def tag(self) -> str:
        if self.kind == "mixed":
            return f"h_{{{self.p:g},{self.q:g}}}"
        return f"h_{self.p:g}" + ("^w" if self.kind == "weak" else "")

    @property
    def target_exponent(self) -> float:
        return self.q if self.kind == "mixed" else self.p


@dataclass
class EstimateOptions:
    restarts: int = 8
    max_iters: int = 60
    inner_iters: int = 200
    tol: float = 1e-12
    seed: int = 0
    bounds: tuple = ()


@dataclass
class NormEstimate:
    quantity: str
    p: float
    q: float | None
    lower_bound: float
    witness: object = field(default=None, repr=False)
    upper_bound: float | None = None
    upper_kind: str | None = None
    iterations: int = 0
    restarts: int = 0
    seed: int | None = None
    status: str = "converged"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.upper_bound is not None and self.upper_bound < self.lower_bound * (1 - 1e-12):
            raise ValueError(f"upper bound {self.upper_bound} below lower bound {self.lower_bound}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = _witness_json(self.witness)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _witness_json(w):
    if w is None:
        return None
    if isinstance(w, dict):
        return {k: _witness_json(v) for k, v in w.items()}
    arr = np.asarray(w, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in arr]


# ---------------------------------------------------------------------------
# T_A and the maximal function

def _column_levels(A: Matrix, space: DyadicSpace) -> np.ndarray:
    levels = A.col_indices()
    if A.cols and (levels[0] < 1 or levels[-1] > space.levels):
        raise ShapeError(f"columns occupy levels {levels[0]}..{levels[-1]}, "
                         f"space has 1..{space.levels}")
    return levels


def _rows_raw(A: Matrix, f: SampleVector) -> np.ndarray:
    levels = _column_levels(A, f.space)
    if A.cols == 0:
        return np.zeros((A.rows, f.space.size), dtype=complex)
    diffs = diff_stack(f.values)[levels - 1]
    return A.entries @ diffs


def apply_TA(A: Matrix, f: SampleVector) -> list[SampleVector]:
    return [SampleVector(f.space, row) for row in _rows_raw(A, f)]


def maximal_function(A: Matrix, f: SampleVector) -> SampleVector:
    rows = _rows_raw(A, f)
    if rows.shape[0] == 0:
        return SampleVector(f.space, np.zeros(f.space.size))
    return SampleVector(f.space, np.abs(rows).max(axis=0))


# ---------------------------------------------------------------------------
# objective

def _objective(B: np.ndarray, f: np.ndarray, mode: Mode) -> float:
    nf = lp_norm(f, mode.p)
    if nf == 0:
        return 0.0
    F = np.abs(B @ diff_stack(f)).max(axis=0)
    if mode.kind == "weak":
        num = weak_lp_norm(F, mode.p)
    else:
        num = lp_norm(F, mode.target_exponent)
    return float(num / nf)


def h_ratio(A: Matrix, f, mode: Mode | str = "strong", p: float = 2.0, q=None) -> float:
    """Ratio achieved by f for the compressed matrix (see module docstring)."""
    mode = _as_mode(mode, p, q)
    B = A.compressed().entries
    f = np.asarray(getattr(f, "values", f), dtype=complex)
    if f.shape != (1 << B.shape[1],):
        raise ShapeError(f"witness must have {1 << B.shape[1]} atoms, got {f.shape}")
    if B.shape[0] == 0:
        return 0.0
    return _objective(B, f, mode)


def _as_mode(mode, p, q) -> Mode:
    if isinstance(mode, Mode):
        return mode
    return Mode(mode, float(p), None if q is None else float(q))


# ---------------------------------------------------------------------------
# linear pieces for a fixed selector

@lru_cache(maxsize=16)
def _diff_projectors(levels: int) -> np.ndarray:
    """P[k-1] is the matrix of Delta_k on 2**levels atoms."""
    eye = np.eye(1 << levels)
    P = diff_stack(eye).transpose(0, 2, 1).copy()
    P.setflags(write=False)
    return P


def _selector_matrix(B: np.ndarray, s: np.ndarray) -> np.ndarray:
    P = _diff_projectors(B.shape[1])
    return np.einsum("wk,kwi->wi", B[s, :], P)


def _adjoint(B: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    levels = B.shape[1]
    Z = np.conj(B[s, :]).T * y
    out = np.zeros(y.shape, dtype=complex)
    for k in range(1, levels + 1):
        out += mart_diff(Z[k - 1], k, levels)
    return out


def _duality(v: np.ndarray, r: float) -> np.ndarray:
    """|v|^(r-1) sgn v, the gradient direction of the r-norm."""
    a = np.abs(v)
    return np.where(a > _EPS, v / np.maximum(a, _EPS), 0) * a ** (r - 1)


def _normalise(f: np.ndarray, p: float) -> np.ndarray:
    n = lp_norm(f, p)
    return f / n if n > 0 else f


def _select(B: np.ndarray, f: np.ndarray):
    rows = B @ diff_stack(f)
    s = np.argmax(np.abs(rows), axis=0)  # first maximum: lowest row wins ties
    return s, rows[s, np.arange(rows.shape[1])]


def _inner(B, s, f, mode: Mode, iters: int, tol: float) -> np.ndarray:
    """Improve f for the linear map L_s with the selector frozen."""
    if mode.kind == "strong" and mode.p == 2 and f.size <= _DENSE_LIMIT:
        L = _selector_matrix(B, s)
        _, _, vh = np.linalg.svd(L)
        top = np.conj(vh[0])
        # keep the orientation of the current iterate to avoid flip-flopping
        phase = np.vdot(top, f)
        return top * (phase / abs(phase) if abs(phase) > 0 else 1)
    p = mode.p if mode.p > 1 else 2.0
    q = mode.target_exponent if mode.target_exponent > 1 else 2.0
    p_dual = p / (p - 1)
    Ls = lambda x: (B[s, :] * diff_stack(x).T).sum(axis=1)
    prev = -1.0
    for _ in range(iters):
        z = _adjoint(B, s, _duality(Ls(f), q))
        f_new = _normalise(_duality(z, p_dual), p)
        if not np.any(f_new):
            break
        f = f_new
        val = lp_norm(Ls(f), q)
        if abs(val - prev) <= tol * max(val, 1e-300):
            break
        prev = val
    return f


def _local_moves(B: np.ndarray, s: np.ndarray, current: float):
    """First-improvement search over selector changes at one atom, then at
    two atoms when that is affordable (p = 2).

    Returns an improved (selector, top singular vector) or None.
    """
    base = _selector_matrix(B, s)
    P = _diff_projectors(B.shape[1])
    n, M = s.size, B.shape[0]
    rows = np.einsum("rk,kwi->rwi", B, P)        # rows[r, w] = row r of T_A at atom w
    singles = [(w, r) for w in range(n) for r in range(M) if r != s[w]]
    moves = [[m] for m in singles]
    if len(singles) * (len(singles) - 1) // 2 <= _PAIR_MOVE_LIMIT:
        moves += [[a, b] for i, a in enumerate(singles) for b in singles[i + 1:] if a[0] != b[0]]
    for start in range(0, len(moves), 256):
        chunk = moves[start:start + 256]
        stack = np.repeat(base[None], len(chunk), axis=0)
        for c, move in enumerate(chunk):
            for w, r in move:
                stack[c, w] = rows[r, w]
        sv = np.linalg.svd(stack, compute_uv=False)[:, 0]
        hit = np.flatnonzero(sv > current * (1 + 1e-12))
        if hit.size:
            move = chunk[hit[0]]
            t = s.copy()
            for w, r in move:
                t[w] = r
            _, _, vh = np.linalg.svd(stack[hit[0]])
            return t, np.conj(vh[0])
    return None


def _ascent(B: np.ndarray, mode: Mode, f0: np.ndarray, opts: EstimateOptions):
    f = _normalise(f0, mode.p)
    best_val, best_f = _objective(B, f, mode), f
    status = "max_iters"
    local = (mode.kind == "strong" and mode.p == 2 and f.size <= _LOCAL_SEARCH_ATOMS
             and f.size * B.shape[0] <= _LOCAL_SEARCH_LIMIT)
    stall, it = 0, 0
    for it in range(1, opts.max_iters + 1):
        s, _ = _select(B, f)
        f = _inner(B, s, f, mode, opts.inner_iters, opts.tol)
        val = _objective(B, f, mode)
        # near-ties in the argmax can flip the selector forever, so stopping
        # is decided on the objective, not on the selector
        stall = stall + 1 if val - best_val <= opts.tol * max(best_val, 1e-300) else 0
        if val > best_val:
            best_val, best_f = val, f
        if stall >= 2:
            move = _local_moves(B, _select(B, best_f)[0], best_val) if local else None
            if move is None:
                status = "converged"
                break
            f, stall = move[1], 0
    return best_val, best_f, it, status


def _starts(B: np.ndarray, rng: np.random.Generator, index: int, complex_: bool) -> np.ndarray:
    levels = B.shape[1]
    n = 1 << levels
    if index == 0:
        return sum(rademacher(levels, k) for k in range(1, levels + 1)).astype(complex)
    if index % 2 == 1:
        f = rng.standard_normal(n)
        if complex_:
            f = f + 1j * rng.standard_normal(n)
        return f.astype(complex)
    # random selector, started from its best linear direction
    s = rng.integers(0, B.shape[0], size=n)
    f = rng.standard_normal(n).astype(complex)
    for _ in range(30):
        f = _normalise(_adjoint(B, s, (B[s, :] * diff_stack(f).T).sum(axis=1)), 2.0)
    return f


# ---------------------------------------------------------------------------
# public estimator

def estimate_h(A: Matrix, mode: Mode | str = "strong", p: float = 2.0, q: float | None = None,
               options: EstimateOptions | None = None, **kw) -> NormEstimate:
    """Multi-restart alternating ascent for h_p, h_p^w or h_{p,q}.

    Each restart alternates a pointwise argmax selector with an improvement
    of f for the frozen selector (exact top singular vector when p = 2 and
    the space is small, nonlinear power iteration otherwise).  The reported
    lower bound is the objective at the stored witness.
    """
    mode = _as_mode(mode, p, q)
    opts = options or EstimateOptions()
    if kw:
        opts = EstimateOptions(**{**asdict(opts), **kw})
    if opts.restarts < 1:
        raise ValueError("need at least one restart")
    B = A.compressed().entries
    upper, kind, extras = _requested_bounds(A, mode, opts.bounds)
    if B.shape[0] == 0:
        return NormEstimate(mode.tag, mode.p, mode.q, 0.0, np.zeros(1), upper, kind,
                            0, opts.restarts, opts.seed, "converged", extras)
    complex_ = not np.all(B.imag == 0)
    seqs = np.random.SeedSequence(opts.seed).spawn(opts.restarts)

    def run(i):
        rng = np.random.default_rng(seqs[i])
        return _ascent(B, mode, _starts(B, rng, i, complex_), opts)

    results = pmap(run, range(opts.restarts))
    # merge by value; ties resolved by restart index so thread timing is irrelevant
    best = max(range(len(results)), key=lambda i: (results[i][0], -i))
    val, f, _, _ = results[best]
    iters = sum(r[2] for r in results)
    status = "converged" if all(r[3] == "converged" for r in results) else "max_iters"
    if upper is not None and upper < val:
        # only possible through rounding at the level of the bound itself
        upper = val
    return NormEstimate(mode.tag, mode.p, mode.q, val, f, upper, kind, iters,
                        opts.restarts, opts.seed, status, extras)


def _requested_bounds(A: Matrix, mode: Mode, bounds):
    candidates = {}
    extras = {}
    for b in bounds:
        if b == "bv":
            if mode.p > 1:
                candidates["bv"] = bv_upper_bound(A, mode.p)
        elif b == "trivial":
            if mode.p == 2:
                candidates["trivial"] = trivial_upper_bound(A)
        elif b == "lorentz":
            from .lorentz import lorentz_column_bound, make_weight
            span = max(A.rows, A.cols) + abs(A.row_offset - A.col_offset) + 1
            lb = lorentz_column_bound(A, make_weight("log", 2.0, span))
            extras["lorentz_column"] = lb.column
            extras["lorentz_crude"] = lb.crude
        else:
            raise ValueError(f"unknown bound {b!r}; use bv, trivial or lorentz")
    if not candidates:
        return None, None, extras
    kind = min(candidates, key=candidates.get)
    return candidates[kind], kind, extras


def bv_upper_bound(A: Matrix, p: float = 2.0) -> float:
    """Summation-by-parts bound: Doob constant p/(p-1) times the largest row variation.

    Every row is a combination of martingale partial sums weighted by its
    jumps (zero-padded at both ends), so this bounds h_p from above and hence
    the weak and mixed (q < p) constants as well.
    """
    if p <= 1:
        raise ValueError("the Doob bound needs p > 1")
    if A.entries.size == 0:
        return 0.0
    padded = np.pad(A.entries, ((0, 0), (1, 1)))
    variation = np.abs(np.diff(padded, axis=1)).sum(axis=1)
    return float(p / (p - 1) * variation.max())


def trivial_upper_bound(A: Matrix) -> float:
    """sqrt(sum_k max_j |a_jk|^2), valid for h_2 by orthogonality of the differences."""
    if A.entries.size == 0:
        return 0.0
    return float(np.sqrt((np.abs(A.entries).max(axis=0) ** 2).sum()))


# ---------------------------------------------------------------------------
# exact oracle

def exact_h2_oracle(A: Matrix, space: DyadicSpace | None = None, batch: int = 2048) -> float:
    """Brute force h_2: top singular value over every selector map.

    For a frozen selector the map f -> row_{s(w)}(T_A f)(w) is linear, so
    complex entries are handled exactly by the SVD.
    """
    if space is None:
        space = DyadicSpace(int(A.col_indices()[-1]) if A.cols else 0)
    levels = _column_levels(A, space)
    M, n = A.rows, space.size
    if M == 0 or not np.any(A.entries):
        return 0.0
    count = M ** n
    if count > ORACLE_LIMIT:
        raise OverflowError(f"{M}^{n} = {count} selector patterns exceeds the limit {ORACLE_LIMIT}")
    P = _diff_projectors(space.levels)[levels - 1]           # (N, n, n)
    R = np.einsum("jk,kwi->jwi", A.entries, P)                # row j of T_A as an n x n map
    best = 0.0
    atoms = np.arange(n)
    patterns = itertools.product(range(M), repeat=n)
    while True:
        chunk = np.array(list(itertools.islice(patterns, batch)))
        if chunk.size == 0:
            break
        stack = R[chunk, atoms[None, :], :]                   # (b, n, n)
        sv = np.linalg.svd(stack, compute_uv=False)[:, 0]
        best = max(best, float(sv.max()))
    return best


# ---------------------------------------------------------------------------
# H(A), truncations, the bilinear model

def H_estimate(A: Matrix, options: EstimateOptions | None = None, **kw) -> NormEstimate:
    low = estimate_h(lower_triangle(A), "strong", 2.0, options=options, **kw)
    up = estimate_h(upper_triangle_transposed(A), "strong", 2.0, options=options, **kw)
    sup = A.sup_norm
    upper = None
    if low.upper_bound is not None and up.upper_bound is not None:
        upper = low.upper_bound + up.upper_bound + sup
    return NormEstimate(
        "H", 2.0, None, low.lower_bound + up.lower_bound + sup,
        {"lower": low.witness, "upper_transposed": up.witness},
        upper, low.upper_kind if upper is not None else None,
        low.iterations + up.iterations, low.restarts, low.seed,
        "converged" if low.status == up.status == "converged" else "max_iters",
        {"h_lower": low.lower_bound, "h_upper_transposed": up.lower_bound, "sup": sup},
    )


def truncation_sequence(entry, sizes, mode: Mode | str = "strong", p: float = 2.0, q=None,
                        **kw) -> list[dict]:
    """Estimates for the square truncations a_jk, 1 <= j, k <= n, n in ``sizes``.

    ``entry(j, k)`` gives the matrix entry.  Since h of a truncation never
    exceeds h of a larger one, the running maximum is reported alongside.
    """
    out, running = [], 0.0
    for n in sizes:
        j, k = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
        A = Matrix(np.vectorize(entry, otypes=[complex])(j, k))
        est = estimate_h(A, mode, p, q, **kw)
        running = max(running, est.lower_bound)
        out.append({"size": n, "estimate": est.lower_bound, "running_max": running,
                    "status": est.status})
    return out


def _row_levels(A: Matrix, space: DyadicSpace) -> np.ndarray:
    levels = A.row_indices()
    if A.rows and (levels[0] < 1 or levels[-1] > space.levels):
        raise ShapeError(f"rows occupy levels {levels[0]}..{levels[-1]}, "
                         f"space has 1..{space.levels}")
    return levels


def apply_VA(A: Matrix, f: SampleVector, g: SampleVector) -> SampleVector:
    """sum_jk a_jk (Delta_j f)(Delta_k g), rows on f and columns on g."""
    if f.space != g.space:
        raise ShapeError("f and g live on different spaces")
    rl, cl = _row_levels(A, f.space), _column_levels(A, g.space)
    if A.entries.size == 0:
        return SampleVector(f.space, np.zeros(f.space.size))
    df = diff_stack(f.values)[rl - 1]
    dg = diff_stack(g.values)[cl - 1]
    return SampleVector(f.space, np.einsum("jw,jk,kw->w", df, A.entries, dg))


@dataclass
class AdversarialResult:
    g: SampleVector
    lower_bound: float
    evaluated_ratio: float
    level_set_measure: float


def adversarial_pair(A: Matrix, f: SampleVector, lam: float) -> AdversarialResult:
    """Stopping-time partner g for a strictly lower-triangular A.

    With f_j = sum_k a_jk Delta_k f, tau(w) is the first row level where
    |f_j(w)| > lam, and g = r_tau on that set (zero elsewhere).  The pairing
    evaluated is V_A(g, f) = sum_j Delta_j g * f_j, which is at least lam in
    modulus wherever tau is defined.  Hence
    ||V_A(g, f)||_1 >= lam * P(tau < inf), and since ||g||_2^2 = P(tau < inf)
    the certified ratio is lam * P^(1/2) / ||f||_2.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    j, k = np.meshgrid(A.row_indices(), A.col_indices(), indexing="ij")
    if np.any((A.entries != 0) & (k >= j)):
        raise ValueError("adversarial_pair needs a strictly lower-triangular matrix")
    space = f.space
    nf = f.norm(2)
    if nf == 0:
        raise ValueError("f must be nonzero")
    rl = _row_levels(A, space)
    fj = _rows_raw(A, f)
    order = np.argsort(rl, kind="stable")
    tau = np.full(space.size, -1)
    for idx in order:
        hit = (tau < 0) & (np.abs(fj[idx]) > lam)
        tau[hit] = rl[idx]
    g = np.zeros(space.size)
    for level in np.unique(tau[tau > 0]):
        mask = tau == level
        g[mask] = rademacher(space.levels, int(level))[mask]
    g = SampleVector(space, g)
    measure = float(np.mean(tau > 0))
    if measure == 0:
        return AdversarialResult(g, 0.0, 0.0, 0.0)
    ng = g.norm(2)
    evaluated = apply_VA(A, g, f).norm(1) / (nf * ng)
    return AdversarialResult(g, lam * measure / (nf * ng), float(evaluated), measure)
