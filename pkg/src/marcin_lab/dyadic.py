"""Finite dyadic probability spaces and martingale calculus.

A space with ``levels = N`` has ``2**N`` atoms of mass ``2**-N``, indexed
``0 .. 2**N - 1``.  The level-``k`` sigma algebra is generated by the ``2**k``
contiguous blocks of ``2**(N-k)`` atoms, so conditional expectation is a
strided block mean.

Raw helpers (``cond_exp``, ``diff_stack`` ...) work on numpy arrays whose last
axis runs over atoms; ``SampleVector`` wraps one such array together with its
space.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Inputs live on incompatible spaces or have the wrong length."""


@dataclass(frozen=True)
class DyadicSpace:
    levels: int

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 0:
            raise ValueError(f"levels must be a nonnegative integer, got {self.levels!r}")

    @property
    def size(self) -> int:
        return 1 << self.levels

    def block_size(self, k: int) -> int:
        check_level(self, k, lo=0)
        return 1 << (self.levels - k)

    def blocks(self, k: int) -> np.ndarray:
        """Block label of every atom at level ``k``."""
        return np.arange(self.size) // self.block_size(k)

    @classmethod
    def for_length(cls, n: int) -> "DyadicSpace":
        if n < 1 or n & (n - 1):
            raise ShapeError(f"length {n} is not a power of two")
        return cls(n.bit_length() - 1)


def check_level(space: DyadicSpace, k: int, lo: int = 0) -> None:
    if not lo <= k <= space.levels:
        raise IndexError(f"level {k} outside {lo}..{space.levels}")


@dataclass(frozen=True, eq=False)
class SampleVector:
    space: DyadicSpace
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.space.size,):
            raise ShapeError(f"expected {self.space.size} values, got shape {vals.shape}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values) -> "SampleVector":
        vals = np.asarray(values)
        return cls(DyadicSpace.for_length(vals.shape[0]), vals)

    def norm(self, p: float = 2.0) -> float:
        return lp_norm(self.values, p)

    def __add__(self, other: "SampleVector") -> "SampleVector":
        _same_space(self, other)
        return SampleVector(self.space, self.values + other.values)

    def __sub__(self, other: "SampleVector") -> "SampleVector":
        _same_space(self, other)
        return SampleVector(self.space, self.values - other.values)

    def __mul__(self, c) -> "SampleVector":
        return SampleVector(self.space, self.values * c)

    __rmul__ = __mul__

    def allclose(self, other: "SampleVector", atol: float = 1e-12) -> bool:
        return self.space == other.space and np.allclose(self.values, other.values, rtol=0, atol=atol)

    def to_json(self) -> str:
        return json.dumps([[float(z.real), float(z.imag)] for z in self.values])

    @classmethod
    def from_json(cls, text: str) -> "SampleVector":
        pairs = np.asarray(json.loads(text), dtype=float).reshape(-1, 2)
        return cls.from_values(pairs[:, 0] + 1j * pairs[:, 1])


def _same_space(*vs: SampleVector) -> None:
    if len({v.space for v in vs}) != 1:
        raise ShapeError("sample vectors live on different spaces")


def lp_norm(values: np.ndarray, p: float = 2.0, axis: int = -1):
    """Norm with respect to the uniform probability on the last axis."""
    a = np.abs(values)
    if np.isinf(p):
        return a.max(axis=axis)
    return np.mean(a**p, axis=axis) ** (1.0 / p)


def weak_lp_norm(values: np.ndarray, p: float) -> float:
    """sup over lambda of lambda * P(|F| > lambda)**(1/p), probability measure.

    The supremum of the step function is approached from below each distinct
    value ``v``, where it equals ``v * P(|F| >= v)**(1/p)``.
    """
    a = np.sort(np.abs(np.ravel(values)))[::-1]
    if a.size == 0 or a[0] == 0:
        return 0.0
    tail = np.arange(1, a.size + 1) / a.size
    return float(np.max(a * tail ** (1.0 / p)))


# raw array helpers -----------------------------------------------------------

def cond_exp(values: np.ndarray, k: int, levels: int | None = None) -> np.ndarray:
    """E_k applied along the last axis."""
    n = values.shape[-1]
    if levels is None:
        levels = n.bit_length() - 1
    if not 0 <= k <= levels:
        raise IndexError(f"level {k} outside 0..{levels}")
    b = 1 << (levels - k)
    shaped = values.reshape(values.shape[:-1] + (n // b, b))
    means = shaped.mean(axis=-1, keepdims=True)
    return np.broadcast_to(means, shaped.shape).reshape(values.shape)


def mart_diff(values: np.ndarray, k: int, levels: int | None = None) -> np.ndarray:
    n = values.shape[-1]
    if levels is None:
        levels = n.bit_length() - 1
    if not 1 <= k <= levels:
        raise IndexError(f"difference level {k} outside 1..{levels}")
    return cond_exp(values, k, levels) - cond_exp(values, k - 1, levels)


def expectation_ladder(values: np.ndarray) -> list[np.ndarray]:
    """[E_0 f, ..., E_N f] at block resolution (length 2**k each).

    Built by pairwise averaging from the top, O(2**N) total.
    """
    n = values.shape[-1]
    levels = n.bit_length() - 1
    out = [values]
    cur = values
    for _ in range(levels):
        cur = 0.5 * (cur[..., 0::2] + cur[..., 1::2])
        out.append(cur)
    return out[::-1]


def diff_stack(values: np.ndarray) -> np.ndarray:
    """Array of shape (N,) + values.shape with row k-1 holding Delta_k f."""
    n = values.shape[-1]
    levels = n.bit_length() - 1
    ladder = expectation_ladder(values)
    out = np.empty((levels,) + values.shape, dtype=np.result_type(values, float))
    for k in range(1, levels + 1):
        fine = np.repeat(ladder[k], n >> k, axis=-1)
        coarse = np.repeat(ladder[k - 1], n >> (k - 1), axis=-1)
        out[k - 1] = fine - coarse
    return out


def rademacher(levels: int, k: int) -> np.ndarray:
    """r_k: +1 on the first half of every level-(k-1) block, -1 on the second."""
    if not 1 <= k <= levels:
        raise IndexError(f"Rademacher index {k} outside 1..{levels}")
    bit = (np.arange(1 << levels) >> (levels - k)) & 1
    return 1.0 - 2.0 * bit


# public operations -------------------------------------------------------------

def conditional_expectation(f: SampleVector, k: int) -> SampleVector:
    check_level(f.space, k, lo=0)
    return SampleVector(f.space, cond_exp(f.values, k, f.space.levels))


def martingale_diff(f: SampleVector, k: int) -> SampleVector:
    check_level(f.space, k, lo=1)
    return SampleVector(f.space, mart_diff(f.values, k, f.space.levels))


def martingale_parts(f: SampleVector) -> list[SampleVector]:
    """[E_0 f, Delta_1 f, ..., Delta_N f]."""
    parts = [conditional_expectation(f, 0)]
    stack = diff_stack(f.values)
    parts.extend(SampleVector(f.space, row) for row in stack)
    return parts


def martingale_synthesis(parts) -> SampleVector:
    """Inverse of ``martingale_parts``: E_0 f + sum_k Delta_k f."""
    parts = list(parts)
    if not parts:
        raise ShapeError("no parts given")
    _same_space(*parts)
    total = np.sum([v.values for v in parts], axis=0)
    return SampleVector(parts[0].space, total)
