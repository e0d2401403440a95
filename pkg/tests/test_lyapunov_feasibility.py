from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab import lyapunov_feasibility as lf


def test_build_matrix_examples():
    assert lf.build_matrix([1]) == [[4]]
    assert lf.build_matrix([1, 1]) == [[4, 0], [0, 2]]
    assert lf.build_matrix([1, 2, 3]) == [[4, 1, 3], [1, 4, -2], [3, -2, 6]]
    M = lf.build_matrix(np.arange(1.0, 7.0))
    np.testing.assert_array_equal(M, M.T)


def test_reference_minors():
    assert tuple(lf.leading_minors_exact(lf.REFERENCE_LAMBDA)) == lf.REFERENCE_MINORS
    assert lf.leading_minors_exact(lf.REFERENCE_LAMBDA)[-1] == 136953089422286895648


def test_reference_matrix_pd_both_modes():
    assert lf.is_positive_definite(lf.build_matrix(list(lf.REFERENCE_LAMBDA))) is True
    assert lf.is_positive_definite(lf.build_matrix([float(v) for v in lf.REFERENCE_LAMBDA]),
                                   "float") is True
    assert lf.is_positive_definite([[1, 0], [0, 1]]) is True


def brute_minor(M, k):
    from blowup_lab.lyapunov_feasibility import _det_exact
    return _det_exact([row[:k] for row in M[:k]])


def test_ones_d11_matches_brute_force():
    M = lf.build_matrix([1] * 11)
    minors = lf.bareiss_minors(M)
    assert [np.sign(float(m)) for m in minors] == [np.sign(float(brute_minor(M, k)))
                                                   for k in range(1, 12)]
    assert lf.is_positive_definite(M) == all(m > 0 for m in minors)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=10, max_size=10))
def test_modes_agree_on_integer_matrices(vals):
    B = np.array(vals[:9]).reshape(3, 3)
    M = (B @ B.T + np.diag([vals[9]] * 3)).astype(int).tolist()
    exact = lf.is_positive_definite(M)
    fl = lf.is_positive_definite(M, "float")
    if fl != "indeterminate":
        assert fl == exact
    assert lf.bareiss_minors(M) == [brute_minor(M, k) for k in range(1, 4)]


def test_float_mode_indeterminate_on_singular():
    assert lf.is_positive_definite([[1.0, 1.0], [1.0, 1.0]], "float") == "indeterminate"
    with pytest.raises(ValueError):
        lf.is_positive_definite([[1.0, 2.0], [0.0, 1.0]], "float")


@pytest.mark.parametrize("c", [Fraction(1, 2), 3])
def test_scaling_invariance(c):
    lam = list(lf.REFERENCE_LAMBDA)
    scaled = [Fraction(v) * c for v in lam]
    assert lf.is_positive_definite(lf.build_matrix(scaled)) == lf.is_positive_definite(
        lf.build_matrix(lam))
    assert lf.min_eig_normalized(lam) == pytest.approx(lf.min_eig_normalized(
        [float(v) for v in scaled]), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12))
def test_simplex_projection(v):
    p = lf.project_simplex(np.array(v))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert p.min() >= lf.LAMBDA_FLOOR - 1e-15
    # idempotent
    np.testing.assert_allclose(lf.project_simplex(p), p, atol=1e-12)


def test_search_d1_value_four():
    c = lf.search_lambda(1, restarts=1, iters=5, seed=0)
    assert c.feasible and c.min_eig == pytest.approx(4.0)


@pytest.mark.parametrize("d", [2, 6, 10])
def test_search_feasible_and_exact(d):
    c = lf.search_lambda(d, restarts=4, iters=2000, seed=d)
    assert c.feasible
    assert c.exact_pd == (c.min_eig > 0)
    assert all(isinstance(v, int) for v in c.lam)


def test_search_d11_infeasible():
    c = lf.search_lambda(11, restarts=6, iters=1000, seed=3)
    assert not c.feasible and not c.exact_pd


def test_running_best_non_decreasing():
    h = lf.ascent_history(8, 400, seed=2)
    assert all(b >= a for a, b in zip(h, h[1:]))
    longer = lf.ascent_history(8, 800, seed=2)
    assert longer[-1] >= h[-1]


def test_report_is_structured():
    rep = lf.search_lambda(2, restarts=1, iters=50).report()
    keys = [line.split(":")[0] for line in rep.splitlines()]
    assert keys == ["d", "lambda", "minors", "min_eig", "feasible"]
