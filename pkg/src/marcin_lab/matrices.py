"""Finite complex matrices with absolute index offsets.

Entry ``entries[i, c]`` stands for ``a_{jk}`` with ``j = row_offset + 1 + i``
and ``k = col_offset + 1 + c``.  With zero offsets this is the usual 1-based
labelling; offsets let a finite block represent a window of a doubly infinite
matrix (translations, truncations).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Matrix:
    entries: np.ndarray = field(repr=False)
    row_offset: int = 0
    col_offset: int = 0

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex, ndmin=2)
        if a.ndim != 2:
            raise ValueError(f"matrix entries must be 2-d, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "row_offset", int(self.row_offset))
        object.__setattr__(self, "col_offset", int(self.col_offset))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def row_indices(self) -> np.ndarray:
        return self.row_offset + 1 + np.arange(self.rows)

    def col_indices(self) -> np.ndarray:
        return self.col_offset + 1 + np.arange(self.cols)

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.entries).max()) if self.entries.size else 0.0

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.entries.imag == 0))

    @property
    def T(self) -> "Matrix":
        return Matrix(self.entries.T, self.col_offset, self.row_offset)

    def scaled(self, c) -> "Matrix":
        return Matrix(self.entries * c, self.row_offset, self.col_offset)

    def nonzero_pattern(self):
        keep_r = np.flatnonzero(np.any(self.entries != 0, axis=1))
        keep_c = np.flatnonzero(np.any(self.entries != 0, axis=0))
        return keep_r, keep_c

    def compressed(self) -> "Matrix":
        """Drop all-zero rows and columns (order kept, offsets reset).

        The maximal-operator constants do not see zero rows, and zero columns
        may be removed without changing them either.
        """
        keep_r, keep_c = self.nonzero_pattern()
        return Matrix(self.entries[np.ix_(keep_r, keep_c)].reshape(len(keep_r), len(keep_c)))

    def to_dict(self) -> dict:
        data = [[float(z.real), float(z.imag)] for z in self.entries.ravel()]
        return {"rows": self.rows, "cols": self.cols,
                "row_offset": self.row_offset, "col_offset": self.col_offset,
                "data": data}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Matrix":
        rows, cols = int(d["rows"]), int(d["cols"])
        data = np.asarray(d["data"], dtype=float)
        if data.shape != (rows * cols, 2):
            raise ValueError(f"data has shape {data.shape}, expected ({rows * cols}, 2)")
        z = (data[:, 0] + 1j * data[:, 1]).reshape(rows, cols)
        return cls(z, d.get("row_offset", 0), d.get("col_offset", 0))

    @classmethod
    def from_json(cls, text: str) -> "Matrix":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return (self.shape == other.shape and self.row_offset == other.row_offset
                and self.col_offset == other.col_offset
                and bool(np.array_equal(self.entries, other.entries)))

    __hash__ = None


def _strictly_increasing(seq, name):
    seq = [int(x) for x in seq]
    if any(x < 1 for x in seq) or any(b <= a for a, b in zip(seq, seq[1:])):
        raise ValueError(f"{name} must be strictly increasing positive integers, got {seq}")
    return seq


def insert_zeros(A: Matrix, rows_map, cols_map, shape=None) -> Matrix:
    """Spread the entries of A into a larger zero matrix.

    ``b[rows_map[r], cols_map[s]] = a[r, s]`` (1-based positions); every other
    entry of B is zero.  ``shape`` defaults to the smallest one that fits.
    """
    rows_map = _strictly_increasing(rows_map, "rows_map")
    cols_map = _strictly_increasing(cols_map, "cols_map")
    if len(rows_map) != A.rows or len(cols_map) != A.cols:
        raise ValueError("maps must have one entry per row/column of A")
    m1, n1 = shape if shape is not None else (rows_map[-1], cols_map[-1])
    if m1 < rows_map[-1] or n1 < cols_map[-1]:
        raise ValueError(f"shape {(m1, n1)} too small for the maps")
    b = np.zeros((m1, n1), dtype=complex)
    b[np.ix_(np.array(rows_map) - 1, np.array(cols_map) - 1)] = A.entries
    return Matrix(b, A.row_offset, A.col_offset)


def repeat_columns(A: Matrix, n: int) -> Matrix:
    if n < 1:
        raise ValueError("repeat count must be >= 1")
    return Matrix(np.repeat(A.entries, n, axis=1), A.row_offset, A.col_offset * n)


def translate(A: Matrix, r: int, s: int) -> Matrix:
    """A^{[r,s]} = (a_{j+r, k+s}); only the index labels move."""
    return Matrix(A.entries, A.row_offset - r, A.col_offset - s)


def _index_grids(A: Matrix):
    return np.meshgrid(A.row_indices(), A.col_indices(), indexing="ij")


def lower_triangle(A: Matrix) -> Matrix:
    """A_L: keep a_{jk} with k < j (absolute indices)."""
    j, k = _index_grids(A)
    return Matrix(np.where(k < j, A.entries, 0), A.row_offset, A.col_offset)


def upper_triangle(A: Matrix) -> Matrix:
    j, k = _index_grids(A)
    return Matrix(np.where(k > j, A.entries, 0), A.row_offset, A.col_offset)


def upper_triangle_transposed(A: Matrix) -> Matrix:
    """A_U^t."""
    return upper_triangle(A).T


def diagonal_part(A: Matrix) -> Matrix:
    j, k = _index_grids(A)
    return Matrix(np.where(k == j, A.entries, 0), A.row_offset, A.col_offset)


def diagonal_band(A: Matrix, width: int) -> Matrix:
    """Keep entries with |j - k| <= width."""
    if width < 0:
        raise ValueError("band width must be >= 0")
    j, k = _index_grids(A)
    return Matrix(np.where(np.abs(j - k) <= width, A.entries, 0), A.row_offset, A.col_offset)


_TRANSFORMS = {
    "insert_zeros": insert_zeros,
    "repeat_columns": repeat_columns,
    "translate": translate,
    "lower_triangle": lower_triangle,
    "upper_triangle_transposed": upper_triangle_transposed,
    "diagonal_band": diagonal_band,
}


def transform(A: Matrix, op: str, *args, **kwargs) -> Matrix:
    try:
        fn = _TRANSFORMS[op]
    except KeyError:
        raise ValueError(f"unknown transform {op!r}; choose from {sorted(_TRANSFORMS)}") from None
    return fn(A, *args, **kwargs)
