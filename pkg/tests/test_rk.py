import math

import numpy as np
import pytest

from blowup_lab import rk


def run_to(f, y0, t_end, **kw):
    cap = lambda t, y: t_end - t
    for t, y in rk.solve(f, 0.0, y0, max_step=cap, **kw):
        if t_end - t <= 1e-14:
            return t, y


def test_exponential_to_tolerance():
    t, y = run_to(lambda t, y: y, [1.0], 2.0, rtol=1e-10, atol=1e-12)
    assert t == pytest.approx(2.0, abs=1e-14)
    assert y[0] == pytest.approx(math.exp(2.0), rel=1e-9)


def test_harmonic_oscillator_energy():
    f = lambda t, y: np.array([y[1], -y[0]])
    _, y = run_to(f, [1.0, 0.0], 10.0, rtol=1e-11, atol=1e-13)
    assert y[0] == pytest.approx(math.cos(10.0), abs=1e-9)
    assert y[1] == pytest.approx(-math.sin(10.0), abs=1e-9)


def test_first_sample_is_initial_state():
    gen = rk.solve(lambda t, y: -y, 0.5, [3.0], rtol=1e-8, atol=1e-10)
    t, y = next(gen)
    assert t == 0.5 and y[0] == 3.0


def test_inadmissible_candidates_are_rejected_not_clipped():
    # y' = -10 drives y through zero; positivity can then only be kept by shrinking steps
    gen = rk.solve(lambda t, y: np.array([-10.0]), 0.0, [1.0], rtol=1e-8, atol=1e-10,
                   admissible=lambda y: bool(y[0] > 0), first_step=0.05)
    with pytest.raises(rk.StepSizeUnderflow):
        for _, y in gen:
            assert y[0] > 0


def test_error_order_is_five():
    f = lambda t, y: np.array([math.cos(t) * y[0]])
    k1 = f(0.0, np.array([1.0]))
    errs = []
    for h in (0.2, 0.1):
        y, _, _ = rk.dopri_step(f, 0.0, np.array([1.0]), h, k1)
        errs.append(abs(y[0] - math.exp(math.sin(h))))
    # local error of a 5th order method scales like h^6
    assert errs[0] / errs[1] > 2 ** 5
