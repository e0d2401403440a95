import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab import timechange as tc
from blowup_lab.ode_blowup import T_D1, IntegratorConfig, analytic_trajectory_d1, integrate


def d1_cascade(n, s_max=12.0):
    return tc.cascade(analytic_trajectory_d1(tc.log_time_grid(T_D1, s_max, n)), T_D1)


def test_u_on_closed_form():
    c = d1_cascade(500)
    t = c.u.t
    th = t / math.sqrt(2)
    # u0 = 1/((T-t) y), u1 = y'/y^2 = 1/(2 sin^2)
    np.testing.assert_allclose(c.u.u[:, 0], 1 / ((T_D1 - t) * math.sqrt(2) * np.tan(th)), rtol=1e-9)
    np.testing.assert_allclose(c.u.u[:, 1], 1 / (2 * np.sin(th) ** 2), rtol=1e-9)
    assert c.u.bound < 1.0


def test_limits_reached_on_oracle():
    c = d1_cascade(2000, s_max=15.0)
    np.testing.assert_allclose(c.v.v[-1], tc.u_limits(1), atol=1e-5)


def test_residuals_refine_at_second_order():
    coarse = tc.residual_report(d1_cascade(1000))
    fine = tc.residual_report(d1_cascade(2000))
    for k in coarse:
        assert coarse[k] / fine[k] > 3.5, k


def test_w_is_lv_and_clock_matches_integral():
    c = d1_cascade(4000)
    assert tc.residual_system_w(c.w).max() < 1e-5
    assert tc.round_trip_defect(c.w) < 1e-6
    avg, ratio = tc.mean_growth(c.w)
    assert abs(avg[-1] - 0.5) < 0.02 and abs(ratio[-1] - 0.5) < 0.02


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 30.0))
def test_phi_round_trip(s):
    assert float(tc.phi_inverse(tc.phi(s, 3.0), 3.0)) == pytest.approx(s, abs=1e-9 * max(1, math.exp(s)))


def test_phi_maps_zero_to_t0():
    assert float(tc.phi(0.0, T_D1)) == pytest.approx((1 - 1 / math.e) * T_D1, rel=1e-15)


def test_coverage_errors():
    late = analytic_trajectory_d1(tc.log_time_grid(T_D1, 10.0, 100)[5:])
    with pytest.raises(tc.InsufficientCoverage):
        tc.build_v(tc.build_u(late, T_D1))
    short = analytic_trajectory_d1(tc.log_time_grid(T_D1, 2.0, 100))
    with pytest.raises(tc.InsufficientCoverage):
        tc.build_v(tc.build_u(short, T_D1))
    with pytest.raises(tc.InconsistentBlowupTime):
        tc.build_u(short, 1.0)


def test_fd_derivative_needs_three_points():
    with pytest.raises(tc.TooFewSamples):
        tc.fd_derivative(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    x = np.sort(np.random.default_rng(0).uniform(0, 1, 50))
    np.testing.assert_allclose(tc.fd_derivative(x, x**2), 2 * x[1:-1], atol=1e-12)


def test_cascade_on_integrated_d2_trajectory():
    cfg = IntegratorConfig()
    from blowup_lab.ode_blowup import estimate_blowup_shooting
    first = integrate(2, cfg)
    T = estimate_blowup_shooting(2, cfg, first).T
    grid = tc.log_time_grid(T, 14.0, 1500)
    traj = integrate(2, cfg, t_stop=grid[-1], t_marks=grid)
    keep = np.isin(traj.t, grid)
    traj = type(traj)(traj.t[keep], traj.jets[keep], traj.x[keep])
    c = tc.cascade(traj, T)
    rep = tc.residual_report(c)
    assert max(rep.values()) < 1e-3
    np.testing.assert_allclose(c.w.w[-1], [1 / 3, 2 / 3], atol=1e-4)
