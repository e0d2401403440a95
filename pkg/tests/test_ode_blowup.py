import csv
import math

import numpy as np
import pytest

from blowup_lab.ode_blowup import (T_D1, DerivativeJet, IntegratorConfig, InvariantViolation,
                                   Trajectory, analytic_d1, analytic_trajectory_d1,
                                   cauchy_field, estimate_blowup_shooting, integrate)

# blow-up times frozen from shooting runs at rel_tol 1e-12, y_max 1e8;
# each agrees with the series radius (N = 4096) to 5e-9 (d=2) and 1.1e-6 (d=3)
T_SHOOT = {2: 3.1273479155346, 3: 3.8400717948962, 5: 4.92784615267}


def test_cauchy_field_examples():
    np.testing.assert_array_equal(cauchy_field([1.0, 2.0], 1), [2.0, 2.0])
    np.testing.assert_array_equal(cauchy_field([0.0, 0.0, 1.0], 2), [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        cauchy_field([1.0, 2.0], 2)


def test_analytic_d1_values():
    jet = analytic_d1(0.0)
    assert jet.y == 0.0 and jet.jet[1] == 1.0
    t = 1.0
    assert analytic_d1(t).y == pytest.approx(math.sqrt(2) * math.tan(t / math.sqrt(2)), rel=1e-15)
    with pytest.raises(ValueError):
        analytic_d1(T_D1)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(y_max=10.0)


def test_d1_matches_closed_form():
    cfg = IntegratorConfig()
    traj = integrate(1, cfg)
    exact = analytic_trajectory_d1(traj.t)
    gap = T_D1 - traj.t
    # the integrated pole sits within ~1e-13 of T, so the relative error grows like dT/(T-t)
    allowed = 10 * cfg.rel_tol * np.maximum(1.0, T_D1 / gap)
    assert np.all(np.abs(traj.y[1:] / exact.y[1:] - 1) <= allowed[1:])
    # x = int y inherits the same pole shift: dx ~ y dT ~ dT / (T - t)
    assert np.all(np.abs(traj.x - exact.x) <= allowed)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_invariants_along_run(d):
    traj = integrate(d, IntegratorConfig(y_max=1e6))
    assert np.all(np.diff(traj.jets, axis=0) >= 0)
    assert np.all(traj.jets[:, d] >= 1.0)
    # exp(x) = y^(d), relative
    np.testing.assert_allclose(np.exp(traj.x), traj.jets[:, d], rtol=1e-9)


def test_marks_are_landed_exactly():
    marks = [0.5, 1.0, 1.5]
    traj = integrate(2, IntegratorConfig(), t_stop=2.0, t_marks=marks)
    for m in marks + [2.0]:
        assert m in traj.t


@pytest.mark.parametrize("d", [2, 3, 5])
def test_shooting_frozen_values(d):
    est = estimate_blowup_shooting(d)
    assert est.T == pytest.approx(T_SHOOT[d], abs=1e-9)
    assert est.uncertainty < 1e-7


def test_shooting_d1_and_consistency_across_ymax():
    hi = estimate_blowup_shooting(1)
    lo = estimate_blowup_shooting(1, IntegratorConfig(y_max=1e4))
    assert abs(hi.T - T_D1) < 1e-12
    assert hi.agrees_with(lo)
    assert hi.uncertainty < lo.uncertainty


def test_shooting_rejects_large_d():
    with pytest.raises(ValueError):
        estimate_blowup_shooting(11)


def test_trajectory_indexing_and_csv(tmp_path):
    traj = integrate(1, IntegratorConfig(y_max=1e3))
    jet = traj[3]
    assert isinstance(jet, DerivativeJet) and jet.d == 1
    assert len(list(traj)) == len(traj)
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "y0", "y1", "x"]
    assert float(rows[-1][0]) == traj.t[-1]  # 17 digits round-trip


def test_invariant_violation_type():
    assert issubclass(InvariantViolation, RuntimeError)
    traj = Trajectory([0.0, 1.0], [[0.0, 1.0], [1.0, 2.0]], [0.0, 0.5])
    assert traj.d == 1 and traj.y.tolist() == [0.0, 1.0]
