"""Periodic-grid harmonic analysis in one dimension.

The real line is replaced by the torus of length ``L`` sampled at ``M``
points ``x_m = m L / M``.  Frequencies are ``q / L`` with integer ``q`` in
FFT order, and coefficients follow ``f(x_m) = sum_q fhat[q] e^{2 pi i q m / M}``,
i.e. ``fhat = fft(f) / M``.  Norms use Lebesgue measure on the torus.

Dyadic cells have absolute side ``2**-k`` anchored at 0, so ``L`` must be a
power of two for them to tile the period.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .matrices import Matrix


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _log2_exact(x: float):
    e = math.log2(x)
    return int(round(e)) if abs(e - round(e)) < 1e-12 else None


@dataclass(frozen=True)
class PeriodicGrid:
    M: int
    L: float = 1.0
    n: int = 1

    def __post_init__(self):
        if self.n != 1:
            raise NotImplementedError("only one-dimensional grids are implemented")
        if not _is_pow2(self.M):
            raise ValueError(f"M must be a power of two, got {self.M}")
        if _log2_exact(self.L) is None:
            raise ValueError(f"L must be a power of two so dyadic cells tile the period, got {self.L}")

    @property
    def spacing(self) -> float:
        return self.L / self.M

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.M) * self.spacing

    @property
    def freq_index(self) -> np.ndarray:
        """Integer q of every FFT slot."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M).astype(int)

    @property
    def freqs(self) -> np.ndarray:
        return np.fft.fftfreq(self.M, d=self.spacing)

    @property
    def nyquist(self) -> float:
        return self.M / (2 * self.L)

    @property
    def lowest(self) -> float:
        return 1.0 / self.L

    # level ranges ---------------------------------------------------------
    @property
    def coarsest_level(self) -> int:
        """Level whose single cell is the whole period."""
        return -_log2_exact(self.L)

    @property
    def finest_level(self) -> int:
        """Level whose cells are single grid points."""
        return _log2_exact(self.M / self.L)

    def martingale_band(self, min_points: int = 4) -> list[int]:
        """Levels k whose difference Delta_k is resolved faithfully.

        The parent cell must fit in the period and the cell must hold at
        least ``min_points`` samples.
        """
        lo = self.coarsest_level + 1
        hi = self.finest_level - int(round(math.log2(min_points)))
        return list(range(lo, hi + 1))

    def lp_cover(self) -> list[int]:
        """Every j whose bump phi(2^-j .) touches a nonzero grid frequency."""
        return list(range(math.floor(math.log2(self.lowest)), math.ceil(math.log2(self.nyquist)) + 1))

    def lp_band(self, margin: int = 0) -> list[int]:
        """j with the whole annulus 2^(j-1)..2^(j+1) inside 1/L..nyquist/2^margin."""
        return [j for j in self.lp_cover()
                if 2.0 ** (j - 1) >= self.lowest and 2.0 ** (j + 1) <= self.nyquist / 2**margin]

    def in_lp_band(self, j: int) -> bool:
        return 2.0 ** (j - 1) >= self.lowest and 2.0 ** (j + 1) <= self.nyquist

    def to_dict(self) -> dict:
        return {"n": self.n, "M": self.M, "L": self.L}


# ---------------------------------------------------------------------------
# grid functions

@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)
    flags: frozenset = frozenset()

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.M,):
            raise ValueError(f"expected {self.grid.M} samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @classmethod
    def from_coefficients(cls, grid: PeriodicGrid, fhat, flags=()) -> "GridFunction":
        return cls(grid, np.fft.ifft(np.asarray(fhat)) * grid.M, flags)

    @classmethod
    def from_callable(cls, grid: PeriodicGrid, fn) -> "GridFunction":
        return cls(grid, fn(grid.x))

    @property
    def coefficients(self) -> np.ndarray:
        c = self.__dict__.get("_fhat")
        if c is None:
            c = np.fft.fft(self.values) / self.grid.M
            c.setflags(write=False)
            object.__setattr__(self, "_fhat", c)
        return c

    def norm(self, p: float = 2.0) -> float:
        return grid_norm(self.values, self.grid, p)

    def inner(self, other: "GridFunction") -> complex:
        return complex(np.vdot(other.values, self.values) * self.grid.spacing)

    def with_flags(self, *flags) -> "GridFunction":
        return GridFunction(self.grid, self.values, self.flags | set(flags))

    def __add__(self, other):
        _same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values, self.flags | other.flags)

    def __sub__(self, other):
        _same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values, self.flags | other.flags)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c, self.flags)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        d = self.grid.to_dict()
        d["data"] = [[float(z.real), float(z.imag)] for z in self.values]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        d = json.loads(text)
        grid = PeriodicGrid(int(d["M"]), float(d["L"]), int(d.get("n", 1)))
        data = np.asarray(d["data"], dtype=float).reshape(-1, 2)
        return cls(grid, data[:, 0] + 1j * data[:, 1])

    def to_csv(self) -> str:
        lines = ["x,re,im"]
        lines += [f"{x!r},{z.real!r},{z.imag!r}" for x, z in zip(self.grid.x.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"


def _same_grid(*fs: GridFunction):
    if len({f.grid for f in fs}) != 1:
        raise ValueError("grid functions live on different grids")


def grid_norm(values: np.ndarray, grid: PeriodicGrid, p: float = 2.0) -> float:
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    return float((grid.spacing * np.sum(a**p, axis=-1)) ** (1.0 / p))


def grid_weak_norm(values: np.ndarray, grid: PeriodicGrid, p: float) -> float:
    """sup_lambda lambda |{|F| > lambda}|^(1/p) with Lebesgue measure."""
    a = np.sort(np.abs(np.ravel(values)))[::-1]
    if a.size == 0 or a[0] == 0:
        return 0.0
    measure = np.arange(1, a.size + 1) * grid.spacing
    return float(np.max(a * measure ** (1.0 / p)))


# ---------------------------------------------------------------------------
# bumps

def smooth_g(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def psi_hat(xi):
    """1 on |xi| <= 1, 0 on |xi| >= 2, smooth in between."""
    r = np.abs(np.asarray(xi, dtype=float))
    a, b = smooth_g(2.0 - r), smooth_g(r - 1.0)
    return a / (a + b)


def phi_hat(xi):
    xi = np.asarray(xi, dtype=float)
    return psi_hat(xi) - psi_hat(2.0 * xi)


def zeta_hat(xi):
    """1 on 1/16 <= |xi| <= 1/4, 0 off 1/32 <= |xi| <= 1/2."""
    xi = np.asarray(xi, dtype=float)
    return phi_hat(4 * xi) + phi_hat(8 * xi) + phi_hat(16 * xi)


def smooth_step(t, a: float, b: float):
    """0 for t <= a, 1 for t >= b."""
    t = np.asarray(t, dtype=float)
    u, v = smooth_g(t - a), smooth_g(b - t)
    return u / (u + v)


@dataclass(frozen=True)
class BumpKit:
    psi: object = psi_hat
    phi: object = phi_hat
    zeta: object = zeta_hat

    def phi_j(self, j: int, xi):
        return self.phi(2.0 ** (-j) * np.asarray(xi, dtype=float))


def make_bumps() -> BumpKit:
    return BumpKit()


# ---------------------------------------------------------------------------
# Littlewood-Paley and martingale operators

def lp_multiplier(grid: PeriodicGrid, j: int, variant: str = "delta") -> np.ndarray:
    s = 2.0 ** (-j) * grid.freqs
    if variant == "delta":
        return phi_hat(s)
    if variant == "partial_sum":
        return psi_hat(s)
    raise ValueError(f"variant must be delta or partial_sum, got {variant!r}")


def lp_project(f: GridFunction, j: int, variant: str = "delta") -> GridFunction:
    m = lp_multiplier(f.grid, j, variant)
    flags = set()
    if not f.grid.in_lp_band(j):
        flags.add("out_of_band")
    return GridFunction.from_coefficients(f.grid, f.coefficients * m, f.flags | flags)


def lp_remainder(f: GridFunction, js) -> GridFunction:
    """f minus the sum of the given Littlewood-Paley pieces."""
    total = sum((lp_multiplier(f.grid, j) for j in js), np.zeros(f.grid.M))
    return GridFunction.from_coefficients(f.grid, f.coefficients * (1 - total), f.flags)


def _cell_points(grid: PeriodicGrid, k: int) -> int:
    if not grid.coarsest_level <= k <= grid.finest_level:
        raise ValueError(f"level {k} outside {grid.coarsest_level}..{grid.finest_level} for this grid")
    return int(round(grid.M / grid.L * 2.0 ** (-k)))


def cell_average(values: np.ndarray, grid: PeriodicGrid, k: int) -> np.ndarray:
    """E_k along the last axis."""
    n = _cell_points(grid, k)
    shaped = values.reshape(values.shape[:-1] + (-1, n))
    return np.repeat(shaped.mean(axis=-1), n, axis=-1)


def cell_difference(values: np.ndarray, grid: PeriodicGrid, k: int) -> np.ndarray:
    return cell_average(values, grid, k) - cell_average(values, grid, k - 1)


def grid_mart_diff(f: GridFunction, k: int, variant: str = "difference") -> GridFunction:
    if variant == "expectation":
        return GridFunction(f.grid, cell_average(f.values, f.grid, k), f.flags)
    if variant == "difference":
        return GridFunction(f.grid, cell_difference(f.values, f.grid, k), f.flags)
    raise ValueError(f"variant must be expectation or difference, got {variant!r}")


# ---------------------------------------------------------------------------
# operator norms of compositions

@dataclass
class CrossNorm:
    kind: str
    value: float
    converged: bool
    terms: list
    params: dict


def _lp_apply(values, grid, j, adjoint=False):
    m = lp_multiplier(grid, j)  # real and even, so self-adjoint
    return np.fft.ifft(np.fft.fft(values) * m)


def _composition(kind: str, grid: PeriodicGrid, k=None, j=None, r=None):
    """(apply, adjoint, terms) for the requested composition."""
    if kind == "mart_then_lp":
        terms = [(k, j)]
    elif kind in ("v_r", "v_r_adjoint"):
        lp = set(grid.lp_band(margin=1))
        terms = [(i, i + r) for i in grid.martingale_band() if i + r in lp]
    else:
        raise ValueError(f"unknown composition {kind!r}")

    def forward(x):  # sum Delta_a LP_b
        return sum((cell_difference(_lp_apply(x, grid, b), grid, a) for a, b in terms),
                   np.zeros(grid.M, dtype=complex))

    def backward(y):  # adjoint: sum LP_b Delta_a (Delta_a is an orthogonal projection)
        return sum((_lp_apply(cell_difference(y, grid, a), grid, b) for a, b in terms),
                   np.zeros(grid.M, dtype=complex))

    if kind == "v_r_adjoint":
        forward, backward = backward, forward
    return forward, backward, terms


def cross_norm(kind: str, grid: PeriodicGrid, *, k: int | None = None, j: int | None = None,
               r: int | None = None, tol: float = 1e-10, seed: int = 0) -> CrossNorm:
    """Top singular value of Delta_k LP_j, of V_r = sum_i Delta_i LP_{i+r}, or of V_r^*.

    V_r sums over martingale levels resolved by the grid whose partner
    Littlewood-Paley band sits below half the Nyquist frequency.  The norm
    comes from ARPACK on T^* T.
    """
    params = {"k": k, "j": j, "r": r, "M": grid.M, "L": grid.L}
    if kind == "mart_then_lp" and (k is None or j is None):
        raise ValueError("mart_then_lp needs k and j")
    if kind.startswith("v_r") and r is None:
        raise ValueError(f"{kind} needs r")
    fwd, bwd, terms = _composition(kind, grid, k, j, r)
    if not terms:
        return CrossNorm(kind, 0.0, True, [], params)
    op = LinearOperator((grid.M, grid.M), matvec=lambda x: bwd(fwd(np.ravel(x))), dtype=complex)
    v0 = np.random.default_rng(seed).standard_normal(grid.M).astype(complex)
    try:
        vals = eigsh(op, k=1, which="LM", tol=tol, v0=v0, return_eigenvectors=False)
        value, ok = float(np.sqrt(max(vals.real.max(), 0.0))), True
    except ArpackNoConvergence as exc:
        ev = exc.eigenvalues
        value, ok = (float(np.sqrt(max(ev.real.max(), 0.0))) if len(ev) else float("nan")), False
    return CrossNorm(kind, value, ok, terms, params)


def dense_operator(kind: str, grid: PeriodicGrid, **kw) -> np.ndarray:
    """The composition as an explicit M x M matrix (for small grids and checks)."""
    fwd, _, _ = _composition(kind, grid, kw.get("k"), kw.get("j"), kw.get("r"))
    return np.stack([fwd(e) for e in np.eye(grid.M)], axis=1)


# ---------------------------------------------------------------------------
# bilinear symbols and W_sigma

@dataclass(eq=False)
class Symbol:
    """A bilinear symbol given as a callable sigma(xi, eta), a grid table, or both.

    ``terms`` optionally lists separable pieces (u_r, v_r) of one variable
    each with sigma = sum_r u_r(xi) v_r(eta); W then reduces to products of
    linear multipliers.
    """
    func: object = None
    table: np.ndarray | None = field(default=None, repr=False)
    grid: PeriodicGrid | None = None
    terms: list | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.func is None and self.table is None and self.terms is None:
            raise ValueError("a symbol needs a callable, a table or separable terms")
        if self.table is not None:
            t = np.asarray(self.table, dtype=complex)
            if self.grid is None or t.shape != (self.grid.M, self.grid.M):
                raise ValueError("a symbol table needs a matching grid (M x M, FFT order)")
            if not np.all(np.isfinite(t)):
                raise ValueError("symbol table has non-finite entries")
            self.table = t

    def __call__(self, xi, eta):
        xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
        if self.func is not None:
            return np.asarray(self.func(xi, eta))
        if self.terms is not None:
            return sum(u(xi) * v(eta) for u, v in self.terms)
        # table only: nearest grid frequency
        self.meta.setdefault("flags", set()).add("interpolated")
        q1 = np.rint(xi * self.grid.L).astype(int) % self.grid.M
        q2 = np.rint(eta * self.grid.L).astype(int) % self.grid.M
        return self.table[q1, q2]

    def on_grid(self, grid: PeriodicGrid) -> np.ndarray:
        if self.table is not None and self.grid == grid:
            return self.table
        if self.terms is not None and self.func is None:
            xi = grid.freqs
            return sum(np.outer(u(xi), v(xi)) for u, v in self.terms).astype(complex)
        xi, eta = np.meshgrid(grid.freqs, grid.freqs, indexing="ij")
        return np.asarray(self(xi, eta), dtype=complex)

    def sup_norm(self, grid: PeriodicGrid) -> float:
        if self.table is None and self.func is None and grid.M > 4096:
            return float(self._separable_rows(grid).max())
        return float(np.abs(self.on_grid(grid)).max())

    def _separable_rows(self, grid):
        xi = grid.freqs
        U = np.stack([u(xi) for u, _ in self.terms])
        V = np.stack([v(xi) for _, v in self.terms])
        best = np.zeros(grid.M)
        for chunk in np.array_split(np.arange(grid.M), max(1, grid.M // 2048)):
            best[chunk] = np.abs(U[:, chunk].T @ V).max(axis=1)
        return best

    def scaled(self, c) -> "Symbol":
        func = None if self.func is None else (lambda xi, eta, f=self.func: c * f(xi, eta))
        table = None if self.table is None else c * self.table
        terms = None if self.terms is None else [(lambda x, u=u: c * u(x), v) for u, v in self.terms]
        return Symbol(func, table, self.grid, terms, dict(self.meta, scale=c))

    def dilated(self, factor: float) -> "Symbol":
        """sigma(factor * xi, factor * eta)."""
        func = None if self.func is None else (lambda xi, eta, f=self.func: f(factor * xi, factor * eta))
        terms = None if self.terms is None else [
            (lambda x, u=u: u(factor * x), lambda x, v=v: v(factor * x)) for u, v in self.terms]
        if func is None and terms is None:
            raise ValueError("table-only symbols cannot be dilated off the grid")
        return Symbol(func, None, None, terms, dict(self.meta, dilation=factor))

    def to_dict(self, grid: PeriodicGrid) -> dict:
        d = grid.to_dict()
        d["data"] = [[float(z.real), float(z.imag)] for z in self.on_grid(grid).ravel()]
        return d


def constant_symbol(c: complex = 1.0) -> Symbol:
    return Symbol(terms=[(lambda x: np.full(np.shape(x), c, dtype=complex), lambda x: np.ones(np.shape(x)))],
                  meta={"kind": "constant", "value": c})


def _phases(grid: PeriodicGrid) -> np.ndarray:
    q = grid.freq_index
    m = np.arange(grid.M)
    return np.exp(2j * np.pi * np.outer(q, m) / grid.M)


def apply_bilinear(sigma: Symbol, f: GridFunction, g: GridFunction, method: str = "auto",
                   chunk: int = 256) -> GridFunction:
    """W_sigma(f, g)(x) = sum_{xi, eta} sigma(xi, eta) fhat(xi) ghat(eta) e^{2 pi i x (xi + eta)}.

    ``sweep``: for each xi, inverse-transform sigma(xi, .) ghat, modulate and
    accumulate.  ``reference``: the direct triple sum (small grids only).
    ``separable``: sum of products of linear multipliers, when terms exist.
    """
    _same_grid(f, g)
    grid = f.grid
    if method == "auto":
        method = "separable" if sigma.terms is not None and sigma.func is None and sigma.table is None else "sweep"
    fh, gh = f.coefficients, g.coefficients
    if method == "separable":
        if sigma.terms is None:
            raise ValueError("symbol has no separable terms")
        xi = grid.freqs
        out = np.zeros(grid.M, dtype=complex)
        for u, v in sigma.terms:
            out += np.fft.ifft(u(xi) * fh) * np.fft.ifft(v(xi) * gh) * grid.M**2
        return GridFunction(grid, out, f.flags | g.flags)
    T = sigma.on_grid(grid)
    if method == "reference":
        if grid.M > 64:
            raise ValueError("the reference evaluator is limited to M <= 64")
        E = _phases(grid)
        out = np.einsum("ab,a,b,am,bm->m", T, fh, gh, E, E)
        return GridFunction(grid, out, f.flags | g.flags)
    if method != "sweep":
        raise ValueError(f"unknown method {method!r}")
    q = grid.freq_index
    m = np.arange(grid.M)
    out = np.zeros(grid.M, dtype=complex)
    for start in range(0, grid.M, chunk):
        rows = slice(start, start + chunk)
        H = np.fft.ifft(T[rows] * gh[None, :], axis=1) * grid.M
        E = np.exp(2j * np.pi * np.outer(q[rows], m) / grid.M)
        out += (fh[rows, None] * E * H).sum(axis=0)
    return GridFunction(grid, out, f.flags | g.flags)


def _in_band(grid: PeriodicGrid, idx) -> bool:
    return all(grid.in_lp_band(int(i)) for i in idx)


def sigma_from_matrix(A: Matrix, grid: PeriodicGrid | None = None) -> Symbol:
    """sigma_A(xi, eta) = sum_jk a_jk phi(2^-j xi) phi(2^-k eta), j, k absolute indices.

    Kept in separable form sum_j phi_j(xi) (sum_k a_jk phi_k(eta)).  When a
    grid is given, indices whose annulus leaves the grid band are flagged.
    """
    rows, cols = A.row_indices(), A.col_indices()
    entries = A.entries
    terms = []
    for i, j in enumerate(rows):
        if not np.any(entries[i]):
            continue
        coeffs = entries[i].copy()

        def u(x, j=int(j)):
            return phi_hat(2.0 ** (-j) * np.asarray(x, dtype=float))

        def v(x, coeffs=coeffs):
            x = np.asarray(x, dtype=float)
            return sum(c * phi_hat(2.0 ** (-int(k)) * x) for c, k in zip(coeffs, cols) if c != 0)

        terms.append((u, v))
    if not terms:
        terms = [(lambda x: np.zeros(np.shape(x)), lambda x: np.zeros(np.shape(x)))]
    meta = {"kind": "sigma_A", "rows": rows.tolist(), "cols": cols.tolist(), "flags": set()}
    if grid is not None and not (_in_band(grid, rows) and _in_band(grid, cols)):
        meta["flags"].add("band_truncated")
    return Symbol(terms=terms, meta=meta)


def grid_for_matrix(A: Matrix, L: float = 1.0, max_M: int = 1 << 14):
    """Smallest grid of period L whose band holds every row and column scale of A.

    Returns (grid, required_M); grid is None when required_M exceeds max_M.
    """
    idx = np.concatenate([A.row_indices(), A.col_indices()])
    lo, hi = int(idx.min()), int(idx.max())
    if 2.0 ** (lo - 1) < 1.0 / L:
        raise ValueError(f"index {lo} sits below the lowest frequency of a period-{L} grid")
    # need 2^(hi+1) <= nyquist = M / (2L)
    need = 1 << max(1, math.ceil(math.log2(2 * L * 2.0 ** (hi + 1))))
    return (PeriodicGrid(need, L) if need <= max_M else None), need


# ---------------------------------------------------------------------------
# paraproducts

def _shifted_partial(grid: PeriodicGrid, j: int, gap: int = 3) -> np.ndarray:
    """sum_{k <= j - gap} phi_k on the grid (zero at frequency 0)."""
    m = psi_hat(2.0 ** (gap - j) * grid.freqs)
    m[grid.freq_index == 0] = 0.0
    return m


def paraproduct_symbol(which: str) -> Symbol:
    """tau_L = sum_j sum_{k<=j-3} phi_j(xi) phi_k(eta), tau_U its transpose, tau_D the rest."""
    def low(xi, eta):
        return _tau_low(xi, eta)

    if which == "lower":
        return Symbol(func=low, meta={"kind": "paraproduct", "which": which})
    if which == "upper":
        return Symbol(func=lambda xi, eta: low(eta, xi), meta={"kind": "paraproduct", "which": which})
    if which == "diagonal":
        def diag(xi, eta):
            one = (np.asarray(xi) != 0) & (np.asarray(eta) != 0)
            return one - low(xi, eta) - low(eta, xi)
        return Symbol(func=diag, meta={"kind": "paraproduct", "which": which})
    raise ValueError(f"which must be lower, upper or diagonal, got {which!r}")


def _tau_low(xi, eta):
    xi = np.abs(np.asarray(xi, dtype=float))
    eta = np.abs(np.asarray(eta, dtype=float))
    out = np.zeros(np.broadcast(xi, eta).shape)
    nz = (xi > 0) & (eta > 0)
    if not np.any(nz):
        return out
    x, e = np.broadcast_to(xi, out.shape)[nz], np.broadcast_to(eta, out.shape)[nz]
    # phi_j(x) is nonzero only for the two j around log2 x
    jc = np.floor(np.log2(x)).astype(int)
    acc = np.zeros(x.shape)
    for dj in (0, 1):
        j = jc + dj
        acc += phi_hat(2.0 ** (-j) * x) * psi_hat(2.0 ** (3 - j) * e)
    out[nz] = acc
    return out


def paraproduct(f: GridFunction, g: GridFunction, which: str = "lower", method: str = "product") -> GridFunction:
    """Lower: sum_j LP_j f * S'_j g with S'_j = sum_{k <= j-3} LP_k; upper swaps roles.

    ``product`` evaluates the sum of products directly; ``symbol`` runs the
    bilinear evaluator with the paraproduct symbol.  Both cover every j that
    touches the grid spectrum.
    """
    _same_grid(f, g)
    if method == "symbol":
        return apply_bilinear(paraproduct_symbol(which), f, g, method="sweep")
    if method != "product":
        raise ValueError(f"unknown method {method!r}")
    if which == "upper":
        return paraproduct(g, f, "lower", method)
    grid = f.grid
    if which == "diagonal":
        fg = (f.values - f.coefficients[0]) * (g.values - g.coefficients[0])
        rest = paraproduct(f, g, "lower").values + paraproduct(f, g, "upper").values
        return GridFunction(grid, fg - rest, f.flags | g.flags)
    if which != "lower":
        raise ValueError(f"which must be lower, upper or diagonal, got {which!r}")
    out = np.zeros(grid.M, dtype=complex)
    for j in grid.lp_cover():
        out += paraproduct_summand(f, g, j).values
    return GridFunction(grid, out, f.flags | g.flags)


def paraproduct_summand(f: GridFunction, g: GridFunction, j: int) -> GridFunction:
    grid = f.grid
    a = np.fft.ifft(f.coefficients * lp_multiplier(grid, j)) * grid.M
    b = np.fft.ifft(g.coefficients * _shifted_partial(grid, j)) * grid.M
    return GridFunction(grid, a * b)


@dataclass
class SpectrumCheck:
    j: int
    support_min: float
    support_max: float
    annulus: tuple
    exact_ok: bool
    fft_leak: float


def paraproduct_spectrum(f: GridFunction, g: GridFunction, j: int) -> SpectrumCheck:
    """Frequency support of LP_j f * S'_j g against 2^(j-2) <= |zeta| <= 2^(j+2).

    The exact part adds the integer supports of the two factors (the bumps
    vanish identically off their annuli, so the supports are exact); the FFT
    part measures coefficient mass outside the annulus in the computed product.
    Requires 2^(j+2) <= nyquist so that no sum wraps around.
    """
    grid = f.grid
    if 2.0 ** (j + 2) > grid.nyquist:
        raise ValueError(f"j={j}: annulus reaches past the Nyquist frequency {grid.nyquist}")
    q = grid.freq_index
    a = f.coefficients * lp_multiplier(grid, j)
    b = g.coefficients * _shifted_partial(grid, j)
    lo, hi = 2.0 ** (j - 2), 2.0 ** (j + 2)
    qa, qb = q[a != 0], q[b != 0]
    if qa.size == 0 or qb.size == 0:
        return SpectrumCheck(j, float("nan"), float("nan"), (lo, hi), True, 0.0)
    sums = np.abs(np.add.outer(qa, qb)).ravel() / grid.L
    smin, smax = float(sums.min()), float(sums.max())
    exact = lo <= smin and smax <= hi
    prod = np.fft.fft(paraproduct_summand(f, g, j).values) / grid.M
    outside = (np.abs(grid.freqs) < lo) | (np.abs(grid.freqs) > hi)
    scale = max(np.abs(prod).max(), 1e-300)
    leak = float(np.abs(prod[outside]).max() / scale) if np.any(outside) else 0.0
    return SpectrumCheck(j, smin, smax, (lo, hi), bool(exact), leak)
