import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab.ode_blowup import T_D1
from blowup_lab.series import (SeriesTooShort, estimate_blowup_series, taylor_coefficients)


def test_d1_coefficients_match_log_cos():
    # x = -2 ln cos(t/sqrt2) = t^2/2 + t^4/24 + t^6/180 + 17 t^8/20160 + ...
    a = taylor_coefficients(1, 10, rho=1.0).a
    np.testing.assert_allclose(a[[2, 4, 6, 8]], [1 / 2, 1 / 24, 1 / 180, 17 / 20160], rtol=1e-14)
    assert a[0] == a[1] == a[3] == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8))
def test_only_multiples_of_d_plus_1_survive(d):
    c = taylor_coefficients(d, 12 * (d + 1), rho=1.0)
    n = np.arange(c.N)
    assert np.all(c.a_scaled[n % (d + 1) != 0] == 0)
    assert np.all(c.a_scaled[(n % (d + 1) == 0) & (n > 0)] > 0)
    # leading term of x is t^(d+1)/(d+1)!
    assert c.a[d + 1] == pytest.approx(1 / math.factorial(d + 1), rel=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 4.0))
def test_scaling_does_not_change_coefficients(rho):
    ref = taylor_coefficients(2, 60, rho=1.0).a
    np.testing.assert_allclose(taylor_coefficients(2, 60, rho=rho).a, ref, rtol=1e-12)


def test_d1_radius_and_shrinking_uncertainty():
    short = estimate_blowup_series(taylor_coefficients(1, 32))
    long = estimate_blowup_series(taylor_coefficients(1, 256))
    assert abs(short.T - T_D1) <= 3 * short.uncertainty + 1e-12
    assert abs(long.T - T_D1) < 1e-12
    assert long.uncertainty < short.uncertainty


@pytest.mark.parametrize("d,T", [(2, 3.1273479155346), (3, 3.8400717948962)])
def test_radius_matches_shooting(d, T):
    est = estimate_blowup_series(taylor_coefficients(d, 4096))
    assert abs(est.T - T) < 1e-5
    # the error bar must cover the frozen value without inflation
    assert abs(est.T - T) <= est.uncertainty + 1e-12


def test_evaluate_inside_radius():
    c = taylor_coefficients(1, 256)
    t = 1.0
    assert c.evaluate(t) == pytest.approx(-2 * math.log(math.cos(t / math.sqrt(2))), rel=1e-13)


def test_too_short():
    with pytest.raises(SeriesTooShort):
        taylor_coefficients(3, 4)
    with pytest.raises(SeriesTooShort):
        estimate_blowup_series(taylor_coefficients(1, 8))
    with pytest.raises(ValueError):
        taylor_coefficients(0, 10)


def test_csv_columns(tmp_path):
    c = taylor_coefficients(1, 40)
    c.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "n,a_n,a_n_scaled,rho" and len(lines) == 41
