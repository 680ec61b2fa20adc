import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from marcin_lab.counterexamples import band_matrix
from marcin_lab.lorentz import (check_conditions, d_norm, d_star_norm, lorentz_column_bound, make_weight,
                                weight_from_json)
from marcin_lab.matrices import Matrix

W3 = make_weight("explicit", values=[1, 0.5, 0.25])
seqs = arrays(float, st.integers(1, 6), elements=st.floats(-10, 10, allow_nan=False))


def test_log_weight_values():
    w = make_weight("log_theta", 1.0, 8)
    assert w[1] == 1.0
    assert w[3] == 0.5
    w2 = make_weight("log", 2.0, 16)
    assert w2[15] == pytest.approx(1 / 16)


def test_loglog_is_decreasing_and_finite():
    w = make_weight("loglog_theta", 1.5, 1000)
    assert np.all(np.isfinite(w.values))
    assert np.all(np.diff(w.values) <= 0)


@pytest.mark.parametrize("kwargs", [dict(kind="log", theta=0.0, length=3),
                                    dict(kind="log", theta=1.0, length=0),
                                    dict(kind="explicit", values=[1, 2]),
                                    dict(kind="explicit", values=[1, 0]),
                                    dict(kind="cubic", theta=1.0)])
def test_rejects_bad_weights(kwargs):
    with pytest.raises(ValueError):
        make_weight(**kwargs)


def test_weight_json():
    w = weight_from_json('{"kind":"log","theta":2.0}', 5)
    assert w.kind == "log" and len(w) == 5
    e = weight_from_json(W3.to_json(), 3)
    assert np.array_equal(e.values, W3.values)


class TestNorms:
    def test_d_examples(self):
        assert d_norm([3, 1, 2], W3) == pytest.approx(4.25)
        assert d_norm([0, -5j], W3) == pytest.approx(5.0)
        assert d_norm([0, 0, 0], W3) == 0.0

    def test_d_star_examples(self):
        assert d_star_norm([2, 0, 1], W3) == pytest.approx(2.0)
        assert d_star_norm([0, 0], W3) == 0.0
        assert d_star_norm(W3.values, W3) == pytest.approx(1.0)

    def test_length_check(self):
        with pytest.raises(ValueError):
            d_norm(np.ones(4), W3)

    @given(seqs)
    def test_d_matches_injection_brute_force(self, u):
        w = make_weight("log", 1.0, 6)
        best = max(sum(w[perm[i] + 1] * abs(u[i]) for i in range(len(u)))
                   for perm in itertools.permutations(range(6), len(u)))
        assert d_norm(u, w) == pytest.approx(best, rel=1e-12, abs=1e-12)

    @given(seqs, seqs, st.floats(-5, 5))
    def test_duality_homogeneity_permutation(self, u, v, c):
        n = min(len(u), len(v))
        u, v = u[:n], v[:n]
        w = make_weight("log", 0.7, 6)
        assert abs(np.dot(u, v)) <= d_norm(u, w) * d_star_norm(v, w) + 1e-9
        assert d_norm(c * u, w) == pytest.approx(abs(c) * d_norm(u, w), abs=1e-9)
        assert d_star_norm(c * v, w) == pytest.approx(abs(c) * d_star_norm(v, w), abs=1e-9)
        assert d_norm(u[::-1], w) == pytest.approx(d_norm(u, w))
        assert d_star_norm(-v[::-1], w) == pytest.approx(d_star_norm(v, w))


class TestConditions:
    def test_log_two_converges(self):
        rep = check_conditions(make_weight("log", 2.0, 1 << 20), 1 << 20)
        assert rep.flags["cdn2_blocks_decreasing"]
        assert rep.flags["cdn2_converges"]
        assert rep.decay_exponent == pytest.approx(2.0, abs=0.3)

    def test_log_half_does_not(self):
        rep = check_conditions(make_weight("log", 0.5, 1 << 20), 1 << 20)
        assert not rep.flags["cdn2_converges"]

    def test_cdn1_constant_for_log_weights(self):
        # w_k (log(k+1)/log(j+1))^theta / w_j = 1 identically
        rep = check_conditions(make_weight("log", 1.3, 4096), 4096)
        assert rep.cdn1_ratio_bound == pytest.approx(1.0)

    def test_constant_weights_fail_cdn2(self):
        rep = check_conditions(make_weight("explicit", values=np.ones(1 << 12)), 1 << 12, theta=1.0)
        assert not rep.flags["cdn2_converges"]

    def test_horizon_checked(self):
        with pytest.raises(ValueError):
            check_conditions(W3, 4)


class TestColumnBound:
    def test_zero(self):
        b = lorentz_column_bound(Matrix(np.zeros((3, 3))), W3)
        assert b.column == 0 and b.crude == 0

    def test_band_crude_is_one(self):
        w = make_weight("log", 2.0, 10)
        assert lorentz_column_bound(band_matrix(w, 10), w).crude == pytest.approx(1.0)

    def test_single_column_equal_to_w(self):
        assert lorentz_column_bound(Matrix(W3.values[:, None]), W3).column == pytest.approx(1.0)

    def test_short_weights_rejected(self):
        with pytest.raises(ValueError):
            lorentz_column_bound(Matrix(np.ones((4, 1))), W3)
