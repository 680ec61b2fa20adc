import json

import numpy as np
import pytest

from marcin_lab.counterexamples import (CounterexampleReport, band_matrix, rademacher_witness, sign_matrix,
                                        verify_counterexample)
from marcin_lab.dyadic import DyadicSpace, diff_stack
from marcin_lab.lorentz import make_weight
from marcin_lab.maximal import estimate_h


def test_sign_rows_small():
    assert np.array_equal(sign_matrix(2, 0).entries.real, [[1, 1], [1, -1], [-1, 1], [-1, -1]])
    assert np.array_equal(sign_matrix(1, 0).entries.real, [[1], [-1]])


def test_sign_rows_are_all_patterns():
    A = sign_matrix(5, 0.3).entries.real
    assert len({tuple(r) for r in np.sign(A)}) == 32
    assert np.allclose(np.abs(A), 5**-0.3)


def test_sign_entries_below_log_envelope():
    for N in (2, 6, 10):
        theta = 0.25
        A = sign_matrix(N, theta)
        j, k = np.meshgrid(A.row_indices(), A.col_indices(), indexing="ij")
        assert np.all(np.abs(A.entries) <= 2 * np.log2(2 + np.abs(j - k)) ** -theta + 1e-12)


def test_sign_guard():
    with pytest.raises(OverflowError):
        sign_matrix(21, 0)
    with pytest.raises(ValueError):
        sign_matrix(0, 0)


def test_rademacher_witness():
    assert np.array_equal(rademacher_witness(DyadicSpace(1)).values, [1, -1])
    assert np.array_equal(rademacher_witness(DyadicSpace(2)).values, [2, 0, 0, -2])
    for N in range(1, 9):
        f = rademacher_witness(DyadicSpace(N))
        assert f.norm(2) == pytest.approx(np.sqrt(N))
        assert np.allclose(np.abs(diff_stack(f.values)), 1)


@pytest.mark.parametrize("N, theta, ratio", [(4, 0.25, np.sqrt(2)), (1, 0.7, 1.0), (9, 0.0, 3.0)])
def test_verify_examples(N, theta, ratio):
    rep = verify_counterexample(N, theta)
    assert rep.ratio == pytest.approx(ratio, abs=1e-12)
    assert rep.exact_match
    assert (rep.rows, rep.cols) == (2**N, N)


def test_verify_budget():
    with pytest.raises(OverflowError):
        verify_counterexample(15, 0.25)


def test_estimator_reaches_witness_ratio():
    for N in (2, 3, 4):
        rep = verify_counterexample(N, 0.25)
        assert estimate_h(sign_matrix(N, 0.25), restarts=1).lower_bound >= rep.ratio - 1e-9


def test_report_formats():
    rep = verify_counterexample(3, 0.4)
    d = json.loads(rep.to_json())
    assert d["N"] == 3 and d["exact_match"] is True
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(CounterexampleReport.CSV_FIELDS)
    assert lines[1].startswith("3,0.4,")


def test_band_matrix():
    w = make_weight("explicit", values=[1, 0.5, 0.25])
    assert np.array_equal(band_matrix(w, 1).entries.real, [[1]])
    assert np.array_equal(band_matrix(w, 3).entries.real, [[1, .5, .25], [.5, 1, .5], [.25, .5, 1]])
    with pytest.raises(ValueError):
        band_matrix(w, 4)
