import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings, strategies as st

from blowup_lab import lv_dynamics as lv
from blowup_lab.acceptance import long_run


def test_field_examples():
    m2 = lv.LVModel(2)
    np.testing.assert_allclose(lv.lv_field(m2.w_star_float, m2), [0, 0], atol=1e-16)
    np.testing.assert_array_equal(lv.lv_field([1.0], lv.LVModel(1)), [-1.0])
    for d in (3, 7, 12):
        m = lv.LVModel(d)
        np.testing.assert_allclose(lv.lv_field(m.w_star_float, m), 0, atol=1e-15)


def test_equilibrium_exact_up_to_64():
    for d in range(1, 65):
        m = lv.LVModel(d)
        assert m.check_equilibrium_exact()
        assert m.w_star[-1] == Fraction(d, d + 1)


def test_matrix_shape_d4():
    assert lv.interaction_matrix(4) == [[2, -1, 0, 0], [1, 1, -1, 0], [1, 0, 1, -1], [1, 0, 0, 1]]
    assert lv.interaction_matrix(1) == [[2]]


def test_logistic_d1():
    tr = lv.simulate(lv.LVModel(1), [0.1], 30.0, 1e-11)
    t = tr.t
    # w' = w(1-2w): w = 1/(2 + (1/w0 - 2) e^-t)
    np.testing.assert_allclose(tr.w[:, 0], 1 / (2 + 8 * np.exp(-t)), rtol=1e-8)


def test_stationary_start():
    m = lv.LVModel(5)
    tr = lv.simulate(m, m.w_star_float, 50.0)
    # w* in floating point is stationary up to rounding
    np.testing.assert_allclose(tr.averages[-1], m.w_star_float, atol=1e-12)
    np.testing.assert_allclose(tr.eps[-1], 0.0, atol=1e-12)
    # steps grow until the controller sees error, so the drift is at tolerance level
    np.testing.assert_allclose(lv.distance_to_star(tr, m)[:, 1], 0.0, atol=10 * tr.tol)
    assert lv.permanence_floor(tr) == pytest.approx(1 / 6)


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 9), st.integers(0, 10_000))
def test_invariants_random_runs(d, seed):
    m = lv.LVModel(d)
    w0 = lv.random_initial_conditions(d, 1, seed)[0]
    tr = lv.simulate(m, w0, 40.0)  # raises on any positivity or M violation
    assert np.all(tr.w > 0)
    M = tr.M
    assert np.all(np.diff(M) <= 100 * tr.tol * M[:-1])
    rep = lv.time_average_check(tr, m)
    assert rep.ok


def test_initial_conditions_log_uniform_and_seeded():
    a = lv.random_initial_conditions(4, 1000, 3)
    assert a.min() >= 0.05 and a.max() <= 2.0
    np.testing.assert_array_equal(a, lv.random_initial_conditions(4, 1000, 3))
    # log-uniform: the median sits near the geometric mean of the range
    assert abs(np.median(a) - np.sqrt(0.1)) < 0.03


def test_nonpositive_start_rejected():
    with pytest.raises(lv.PositivityViolation):
        lv.simulate(lv.LVModel(2), [0.5, 0.0], 1.0)


@pytest.mark.parametrize("d", [2, 4, 6])
def test_convergence_small_d(d):
    m = lv.LVModel(d)
    for w0 in lv.random_initial_conditions(d, 3, 100 + d):
        tr = lv.simulate(m, w0, 500.0)
        assert np.abs(tr.w[-1] - m.w_star_float).max() < 1e-6


def test_descent_d2_unit_lambda():
    m = lv.LVModel(2)
    tr = lv.simulate(m, [1.5, 0.1], 30.0, 1e-12)
    rep = lv.lyapunov_descent_check(tr, [1.0, 1.0], m)
    assert rep.positive_definite and rep.min_V >= 0 and not rep.V_zero_off_star
    V = lv.lyapunov_value(tr.w, [1.0, 1.0], m)
    live = V[:-1] > 1e-12  # below this V is rounding noise
    assert np.all(np.diff(V)[live] < 0)
    assert lv.lyapunov_value(m.w_star_float, [1.0, 1.0], m)[0] == 0.0


def test_descent_identity_residual_refines():
    m = lv.LVModel(3)
    res = []
    for h in (0.02, 0.01):
        grid = np.arange(1, int(round(5.0 / h)) + 1) * h
        tr = lv.simulate(m, [0.3, 1.2, 0.2], 5.0, 1e-13, h_max=h, t_marks=grid)
        keep = np.isin(tr.t, np.concatenate([[0.0], grid]))
        tr = lv.LVTrajectory(3, tr.t[keep], tr.w[keep], tr.integral[keep], tr.quad_error[keep],
                             tr.w0, tr.tol)
        res.append(lv.lyapunov_descent_check(tr, [3.0, 1.0, 1.0], m).identity_residual)
    assert res[0] / res[1] > 2


def test_boundary_psi_exhaustive():
    for d in (1, 2, 5, 9):
        rep = lv.boundary_psi_check(lv.LVModel(d))
        assert rep.ok and rep.exhaustive and rep.cascade_gives_w_star
        assert tuple([Fraction(0)] * d) in rep.boundary_points


def test_boundary_psi_sampled_large_d():
    rep = lv.boundary_psi_check(lv.LVModel(16), samples=200)
    assert rep.ok and not rep.exhaustive


def test_stationary_points_include_w_star():
    m = lv.LVModel(4)
    assert m.w_star in lv.stationary_points(m)


def test_d11_floor_stable_under_extension():
    m = lv.LVModel(11)
    tr = long_run(11, 1)
    short = lv.LVTrajectory(11, tr.t[tr.t <= 1000], tr.w[tr.t <= 1000], tr.integral[tr.t <= 1000],
                            tr.quad_error[tr.t <= 1000], tr.w0, tr.tol)
    a, b = lv.permanence_floor(short), lv.permanence_floor(tr)
    assert b > 0 and abs(a - b) <= 0.1 * a


def test_csv_exports(tmp_path):
    tr = lv.simulate(lv.LVModel(2), [0.2, 0.3], 2.0)
    tr.to_csv(tmp_path / "w.csv")
    tr.averages_to_csv(tmp_path / "a.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == "t,w1,w2"
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "t,avg1,avg2"


def test_simulate_many_order_preserved():
    m = lv.LVModel(3)
    ics = lv.random_initial_conditions(3, 3, 5)
    runs = lv.simulate_many(m, ics, 5.0)
    for w0, tr in zip(ics, runs):
        np.testing.assert_array_equal(tr.w0, w0)
