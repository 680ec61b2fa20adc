import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from marcin_lab.dyadic import (DyadicSpace, SampleVector, ShapeError, cond_exp, conditional_expectation,
                               diff_stack, martingale_diff, martingale_parts, martingale_synthesis,
                               rademacher, weak_lp_norm)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def vec(vals):
    return SampleVector.from_values(np.asarray(vals, dtype=float))


@st.composite
def sample_vectors(draw, max_levels=8):
    n = draw(st.integers(0, max_levels))
    re = draw(arrays(float, 1 << n, elements=finite))
    im = draw(arrays(float, 1 << n, elements=finite))
    return SampleVector.from_values(re + 1j * im)


class TestSpace:
    def test_blocks_partition_atoms(self):
        sp = DyadicSpace(3)
        for k in range(4):
            b = sp.blocks(k)
            assert len(np.unique(b)) == 2**k
            assert np.all(np.bincount(b) == 2 ** (3 - k))

    def test_levels_nest(self):
        sp = DyadicSpace(4)
        for k in range(1, 5):
            assert np.array_equal(sp.blocks(k) // 2, sp.blocks(k - 1))

    def test_length_must_be_power_of_two(self):
        with pytest.raises(ShapeError):
            SampleVector.from_values(np.ones(3))


class TestExamples:
    f = vec([4, 0, 0, 0])

    def test_expectation(self):
        assert np.allclose(conditional_expectation(self.f, 1).values, [2, 2, 0, 0])
        assert np.allclose(conditional_expectation(self.f, 0).values, [1, 1, 1, 1])
        c = vec([3.5] * 8)
        for k in range(4):
            assert np.allclose(conditional_expectation(c, k).values, 3.5)

    def test_differences(self):
        assert np.allclose(martingale_diff(self.f, 1).values, [1, 1, -1, -1])
        assert np.allclose(martingale_diff(self.f, 2).values, [2, -2, 0, 0])
        assert np.allclose(martingale_diff(vec([7.0] * 4), 2).values, 0)

    def test_synthesis(self):
        assert np.allclose(martingale_synthesis(martingale_parts(self.f)).values, [4, 0, 0, 0])
        zero = [vec(np.zeros(4))] * 3
        assert np.allclose(martingale_synthesis(zero).values, 0)

    def test_level_errors(self):
        with pytest.raises(IndexError):
            conditional_expectation(self.f, 3)
        with pytest.raises(IndexError):
            martingale_diff(self.f, 0)

    def test_mismatched_spaces(self):
        with pytest.raises(ShapeError):
            martingale_synthesis([vec(np.zeros(4)), vec(np.zeros(8))])

    def test_norm_is_probability_normalised(self):
        assert vec([2, 0, 0, -2]).norm(2) == pytest.approx(np.sqrt(2))
        assert vec([1, -3]).norm(np.inf) == 3
        # weak L2 of |f| = (2,0,0,2): sup lambda P(|f| > lambda)^(1/2) = 2 * 0.5^(1/2)
        assert weak_lp_norm(np.array([2.0, 0, 0, 2]), 2) == pytest.approx(np.sqrt(2))


class TestProperties:
    @given(sample_vectors())
    def test_reconstruction(self, f):
        g = martingale_synthesis(martingale_parts(f))
        scale = max(1.0, np.abs(f.values).max())
        assert np.abs(g.values - f.values).max() <= 1e-12 * scale

    @given(sample_vectors(), st.data())
    def test_expectation_idempotent(self, f, data):
        k = data.draw(st.integers(0, f.space.levels))
        e = conditional_expectation(f, k)
        assert conditional_expectation(e, k).allclose(e, atol=1e-9)

    @given(sample_vectors(), st.data())
    def test_nesting(self, f, data):
        j = data.draw(st.integers(0, f.space.levels))
        k = data.draw(st.integers(0, f.space.levels))
        lhs = conditional_expectation(conditional_expectation(f, k), j)
        rhs = conditional_expectation(f, min(j, k))
        assert lhs.allclose(rhs, atol=1e-12 * max(1.0, np.abs(f.values).max()))

    @given(sample_vectors(max_levels=7))
    def test_parseval(self, f):
        parts = martingale_parts(f)
        total = sum(p.norm(2) ** 2 for p in parts)
        assert total == pytest.approx(f.norm(2) ** 2, rel=1e-12, abs=1e-18)

    @given(sample_vectors(max_levels=7))
    def test_differences_have_zero_parent_means(self, f):
        for k in range(1, f.space.levels + 1):
            d = martingale_diff(f, k).values
            assert np.allclose(cond_exp(d, k - 1), 0, atol=1e-9)

    def test_orthogonality(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 9))
            f = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
            g = rng.standard_normal(1 << n)
            Df, Dg = diff_stack(f), diff_stack(g)
            gram = Df @ Dg.conj().T / (1 << n)
            off = gram - np.diag(np.diag(gram))
            assert np.abs(off).max() <= 1e-12


class TestRademacher:
    def test_first_half_positive(self):
        assert np.array_equal(rademacher(2, 1), [1, 1, -1, -1])
        assert np.array_equal(rademacher(2, 2), [1, -1, 1, -1])

    def test_is_its_own_difference(self):
        for k in range(1, 5):
            r = rademacher(4, k)
            assert np.allclose(diff_stack(r)[k - 1], r)


def test_json_round_trip(rng):
    f = vec(rng.standard_normal(16)) * (1 + 2j)
    data = json.loads(f.to_json())
    assert len(data) == 16 and len(data[0]) == 2
    assert SampleVector.from_json(f.to_json()).allclose(f, atol=0)
