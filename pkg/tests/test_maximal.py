import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from marcin_lab._parallel import THREADS_ENV
from marcin_lab.counterexamples import sign_matrix
from marcin_lab.dyadic import DyadicSpace, SampleVector, ShapeError, martingale_diff
from marcin_lab.matrices import Matrix, insert_zeros, lower_triangle
from marcin_lab.maximal import (EstimateOptions, H_estimate, Mode, NormEstimate, adversarial_pair, apply_TA,
                                apply_VA, bv_upper_bound, estimate_h, exact_h2_oracle, h_ratio,
                                maximal_function, trivial_upper_bound, truncation_sequence)

F = SampleVector.from_values(np.array([4.0, 0, 0, 0]))
small = arrays(float, st.tuples(st.integers(1, 3), st.integers(1, 3)),
               elements=st.floats(-3, 3, allow_nan=False, allow_subnormal=False))


class TestOperators:
    def test_single_entry_is_a_difference(self):
        (row,) = apply_TA(Matrix([[1]]), F)
        assert np.allclose(row.values, [1, 1, -1, -1])

    def test_row_of_ones_removes_the_mean(self):
        (row,) = apply_TA(Matrix([[1, 1]]), F)
        assert np.allclose(row.values, [3, -1, -1, -1])

    def test_zero_matrix(self):
        rows = apply_TA(Matrix(np.zeros((2, 2))), F)
        assert all(np.allclose(r.values, 0) for r in rows)

    def test_maximal_identity(self):
        assert np.allclose(maximal_function(Matrix(np.eye(2)), F).values, [2, 2, 1, 1])

    def test_maximal_sign_invariant(self):
        a = maximal_function(Matrix([[1], [-1]]), F).values
        b = maximal_function(Matrix([[1]]), F).values
        assert np.array_equal(a, b)

    def test_columns_beyond_depth(self):
        with pytest.raises(ShapeError):
            apply_TA(Matrix([[1, 1, 1]]), F)


class TestEstimator:
    def test_single_entry(self):
        assert estimate_h(Matrix([[1]])).lower_bound == pytest.approx(1.0, abs=1e-12)

    def test_identity(self):
        assert estimate_h(Matrix(np.eye(2))).lower_bound == pytest.approx(1.0, abs=1e-6)

    def test_sign_matrix_reaches_rademacher_ratio(self):
        est = estimate_h(sign_matrix(4, 0.25), restarts=2)
        assert est.lower_bound >= 4**0.25 - 1e-9

    def test_zero_matrix(self):
        est = estimate_h(Matrix(np.zeros((2, 3))))
        assert est.lower_bound == 0.0

    def test_invalid_exponents(self):
        with pytest.raises(ValueError):
            estimate_h(Matrix([[1]]), "strong", p=0)
        with pytest.raises(ValueError):
            estimate_h(Matrix([[1]]), "mixed", p=2, q=3)
        with pytest.raises(ValueError):
            Mode("strong", 2.0, 1.0)
        with pytest.raises(ValueError):
            Mode("sideways")

    def test_deterministic_and_thread_independent(self, monkeypatch):
        A = Matrix(np.random.default_rng(3).standard_normal((3, 3)))
        monkeypatch.setenv(THREADS_ENV, "1")
        a = estimate_h(A, restarts=4, seed=9)
        monkeypatch.setenv(THREADS_ENV, "4")
        b = estimate_h(A, restarts=4, seed=9)
        assert a.lower_bound == b.lower_bound
        assert np.array_equal(a.witness, b.witness)

    @given(small, st.sampled_from(["strong", "weak"]), st.sampled_from([1.5, 2.0, 3.0]))
    def test_certificate_reproduces(self, a, kind, p):
        A = Matrix(a)
        est = estimate_h(A, kind, p, restarts=2, max_iters=20)
        assert h_ratio(A, est.witness, kind, p) == pytest.approx(est.lower_bound, abs=1e-9)

    @given(small, st.floats(-4, 4).filter(lambda c: abs(c) > 1e-3))
    def test_scaling_of_stored_witness(self, a, c):
        A = Matrix(a)
        est = estimate_h(A, restarts=2, max_iters=20)
        assert h_ratio(A.scaled(c), est.witness) == pytest.approx(abs(c) * est.lower_bound, rel=1e-12, abs=1e-12)

    @given(small)
    def test_below_bv_bound(self, a):
        A = Matrix(a)
        for kind in ("strong", "weak"):
            est = estimate_h(A, kind, 2.0, restarts=2, max_iters=20, bounds=("bv",))
            assert est.lower_bound <= bv_upper_bound(A) + 1e-9
            assert est.upper_kind == "bv"

    def test_mixed_mode_below_bv(self, rng):
        A = Matrix(rng.standard_normal((3, 3)))
        est = estimate_h(A, "mixed", 2.0, 1.0, restarts=2)
        assert 0 < est.lower_bound <= bv_upper_bound(A)

    def test_weak_not_above_strong_on_same_witness(self, rng):
        A = Matrix(rng.standard_normal((2, 3)))
        est = estimate_h(A, restarts=2)
        assert h_ratio(A, est.witness, "weak") <= est.lower_bound + 1e-12

    def test_complex_entries_against_oracle(self, rng):
        A = Matrix(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        est = estimate_h(A, restarts=6)
        assert est.lower_bound == pytest.approx(exact_h2_oracle(A), abs=1e-6)

    def test_burkholder_small(self, rng):
        for N in (3, 5):
            A = Matrix(rng.choice([-1.0, 1.0], size=(1, N)))
            assert estimate_h(A, "strong", 4.0, restarts=3).lower_bound <= 3.0 + 0.05

    def test_monotone_in_rows(self, rng):
        for _ in range(5):
            A = Matrix(rng.standard_normal((3, 3)))
            sub = Matrix(A.entries[:2])
            assert estimate_h(A).lower_bound >= estimate_h(sub).lower_bound - 1e-9

    def test_zero_padding_invariance(self, rng):
        A = Matrix(rng.standard_normal((2, 2)))
        B = insert_zeros(A, [1, 3], [2, 3])
        assert exact_h2_oracle(B) == pytest.approx(exact_h2_oracle(A), abs=1e-10)
        assert estimate_h(B).lower_bound == pytest.approx(estimate_h(A).lower_bound, abs=1e-9)

    def test_to_json_carries_metadata(self):
        est = estimate_h(Matrix([[1, 0.5]]), bounds=("bv", "trivial"), restarts=2)
        d = json.loads(est.to_json())
        for key in ("quantity", "p", "lower_bound", "witness", "upper_bound", "upper_kind",
                    "iterations", "restarts", "seed", "status"):
            assert key in d
        assert d["upper_kind"] == "trivial"

    def test_upper_below_lower_rejected(self):
        with pytest.raises(ValueError):
            NormEstimate("h_2", 2.0, None, 2.0, upper_bound=1.0)


class TestOracle:
    def test_tiny_cases(self):
        assert exact_h2_oracle(Matrix([[1]]), DyadicSpace(1)) == pytest.approx(1.0)
        assert exact_h2_oracle(Matrix(np.eye(2)), DyadicSpace(2)) == pytest.approx(1.0)

    def test_hadamard_agrees_with_estimator(self):
        A = Matrix([[1, 1], [1, -1]])
        assert estimate_h(A).lower_bound == pytest.approx(exact_h2_oracle(A, DyadicSpace(2)), abs=1e-6)

    def test_selector_brute_force_by_hand(self, rng):
        # independent check: enumerate selectors, build each map column by column
        A = Matrix(rng.standard_normal((2, 2)))
        n = 4
        basis = np.eye(n)
        rows = [np.stack([r.values for r in apply_TA(A, SampleVector.from_values(e))]) for e in basis]
        best = 0.0
        for s in itertools.product(range(2), repeat=n):
            T = np.array([[rows[c][s[w], w] for c in range(n)] for w in range(n)])
            best = max(best, np.linalg.norm(T, 2))
        assert exact_h2_oracle(A, DyadicSpace(2)) == pytest.approx(best, rel=1e-12)

    def test_size_limit(self):
        with pytest.raises(OverflowError, match="limit"):
            exact_h2_oracle(Matrix(np.ones((4, 4))))

    @given(small)
    def test_bounds_sandwich_oracle(self, a):
        A = Matrix(a)
        h = exact_h2_oracle(A, DyadicSpace(3))
        assert h <= trivial_upper_bound(A) + 1e-9
        assert h <= bv_upper_bound(A) + 1e-9


class TestBounds:
    @pytest.mark.parametrize("row, expected", [([1, 1, 1], 4.0), ([0, 0, 0], 0.0), ([1, 0, 1], 8.0)])
    def test_bv_examples(self, row, expected):
        assert bv_upper_bound(Matrix([row])) == expected

    def test_bv_needs_p_above_one(self):
        with pytest.raises(ValueError):
            bv_upper_bound(Matrix([[1]]), 1.0)

    def test_bv_doob_factor(self):
        assert bv_upper_bound(Matrix([[1, 1]]), 3.0) == pytest.approx(1.5 * 2)


class TestH:
    def test_zero(self):
        assert H_estimate(Matrix(np.zeros((3, 3)))).lower_bound == 0.0

    def test_diagonal(self):
        assert H_estimate(Matrix(np.eye(3) * -2.5)).lower_bound == pytest.approx(2.5)

    def test_lower_ones_upper_bound(self):
        A = lower_triangle(Matrix(np.ones((4, 4))))
        est = H_estimate(A, bounds=("bv",), restarts=2)
        assert est.upper_bound <= 5.0 + 1e-12
        assert est.lower_bound <= est.upper_bound

    def test_truncations_are_monotone(self):
        seq = truncation_sequence(lambda j, k: 1.0 / (1 + abs(j - k)), [1, 2, 3, 4], restarts=2)
        running = [r["running_max"] for r in seq]
        assert running == sorted(running)
        assert [r["size"] for r in seq] == [1, 2, 3, 4]


class TestBilinearModel:
    f = SampleVector.from_values(np.array([2.0, 0, -1, -1]))

    def test_example(self):
        assert np.allclose(martingale_diff(self.f, 1).values, [1, 1, -1, -1])
        assert np.allclose(martingale_diff(self.f, 2).values, [1, -1, 0, 0])
        out = apply_VA(Matrix([[0, 0], [1, 0]]), self.f, self.f)
        assert np.allclose(out.values, [1, -1, 0, 0])

    def test_zero_and_bilinearity(self, rng):
        A = Matrix(rng.standard_normal((2, 2)))
        f = SampleVector.from_values(rng.standard_normal(4))
        g = SampleVector.from_values(rng.standard_normal(4))
        assert np.allclose(apply_VA(Matrix(np.zeros((2, 2))), f, g).values, 0)
        assert np.allclose(apply_VA(A, f * 2, g * 3).values, 6 * apply_VA(A, f, g).values)

    def test_adversarial_empty_level_set(self):
        A = Matrix([[0, 0], [1, 0]])
        res = adversarial_pair(A, self.f, 100.0)
        assert res.lower_bound == 0.0 and res.level_set_measure == 0.0

    def test_adversarial_example(self):
        A = Matrix([[0, 0], [1, 0]])
        f = SampleVector.from_values(np.array([2.0, 2, -2, -2]))   # Delta_1 f = f, row 2 = 2 r_1
        res = adversarial_pair(A, f, 1.0)
        assert res.level_set_measure == 1.0
        assert res.evaluated_ratio > 0
        assert np.allclose(np.abs(res.g.values), 1)

    def test_adversarial_properties(self, rng):
        A = lower_triangle(Matrix(rng.standard_normal((4, 4))))
        for _ in range(10):
            f = SampleVector.from_values(rng.standard_normal(16))
            lam = float(rng.uniform(0.1, 1.5))
            res = adversarial_pair(A, f, lam)
            assert res.g.norm(2) ** 2 == pytest.approx(res.level_set_measure)
            assert res.lower_bound <= res.evaluated_ratio + 1e-12

    def test_adversarial_needs_lower_triangle(self):
        with pytest.raises(ValueError):
            adversarial_pair(Matrix(np.eye(2)), self.f, 1.0)
