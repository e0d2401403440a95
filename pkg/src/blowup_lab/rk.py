"""Embedded Dormand-Prince 5(4) integrator with PI step-size control.

The stepper is written as a generator so callers can inspect every accepted
step, stop on their own criteria, and impose per-step caps (e.g. a fraction
of the distance to a pole) or admissibility conditions (e.g. positivity).
"""
from __future__ import annotations

from typing import Callable, Iterator, Optional

import numpy as np

# Butcher tableau, Hairer-Norsett-Wanner (1993), table 5.2
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_LOW

ORDER = 5
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (Gustafsson); beta=0 recovers the elementary controller
PI_ALPHA = 0.7 / ORDER
PI_BETA = 0.4 / ORDER


class StepSizeUnderflow(RuntimeError):
    """The controller asked for a step below the resolution of ``t``."""


Field = Callable[[float, np.ndarray], np.ndarray]


def dopri_step(f: Field, t: float, y: np.ndarray, h: float, k1: np.ndarray):
    """One Dormand-Prince step; returns ``(y_new, err, k_last)``.

    ``k_last`` is ``f(t + h, y_new)`` and can be reused as the next ``k1``
    (first-same-as-last).
    """
    k = [k1]
    for s in range(1, 7):
        dy = np.zeros_like(y)
        for j, a in enumerate(_A[s]):
            if a != 0.0:
                dy += a * k[j]
        k.append(f(t + _C[s] * h, y + h * dy))
    y_new = y + h * sum(b * kj for b, kj in zip(_B, k) if b != 0.0)
    err = h * sum(e * kj for e, kj in zip(_E, k))
    # stage 7 is evaluated at y + h*sum(A[6]*k) which equals y_new
    return y_new, err, k[6]


def _initial_step(f, t, y, f0, rtol, atol):
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t + h0, y + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / ORDER)
    return min(100 * h0, h1)


def solve(
    f: Field,
    t0: float,
    y0,
    *,
    rtol: float,
    atol: float,
    max_step: Optional[Callable[[float, np.ndarray], float]] = None,
    admissible: Optional[Callable[[np.ndarray], bool]] = None,
    first_step: Optional[float] = None,
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield accepted ``(t, y)`` pairs, starting with ``(t0, y0)``.

    Parameters
    ----------
    f : callable
        Right-hand side ``f(t, y)``.
    rtol, atol : float
        Mixed error tolerance; the RMS of ``err / (atol + rtol*|y|)`` must
        not exceed one for a step to be accepted.
    max_step : callable, optional
        ``max_step(t, y)`` bounds the next step. Used both to land exactly on
        an end time and to approach a pole cautiously.
    admissible : callable, optional
        Extra acceptance test on the candidate state. A failing candidate is
        rejected and the step halved; the state is never modified.

    The generator never terminates on its own; the caller breaks out.
    """
    t = float(t0)
    y = np.array(y0, dtype=float)
    k1 = f(t, y)
    h = first_step if first_step is not None else _initial_step(f, t, y, k1, rtol, atol)
    err_prev = 1.0
    yield t, y.copy()
    while True:
        rejected = False
        h_free = h
        while True:
            if max_step is not None:
                h = min(h, max_step(t, y))
            if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
                raise StepSizeUnderflow(f"step size {h:.3e} underflows at t={t!r}")
            y_new, err, k_new = dopri_step(f, t, y, h, k1)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
            if not np.all(np.isfinite(y_new)):
                err_norm = np.inf
            if err_norm <= 1.0 and (admissible is None or admissible(y_new)):
                break
            if err_norm <= 1.0:
                h *= 0.5
            elif np.isfinite(err_norm):
                h *= max(MIN_FACTOR, SAFETY * err_norm ** (-1 / ORDER))
            else:
                h *= MIN_FACTOR
            rejected = True
        t = t + h
        y = y_new
        k1 = k_new
        if err_norm == 0.0:
            factor = MAX_FACTOR
        else:
            factor = SAFETY * err_norm ** (-PI_ALPHA) * err_prev ** PI_BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
        if rejected:
            factor = min(factor, 1.0)
        err_prev = max(err_norm, 1e-4)
        # a step shortened by max_step says nothing about the free step size
        h = max(h * factor, h_free) if not rejected and h < h_free else h * factor
        yield t, y.copy()
