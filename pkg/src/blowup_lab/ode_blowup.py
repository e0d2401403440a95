"""Integration of y^(d+1) = y * y^(d) up to its blow-up time.

The state carried by the integrator is the jet ``(y, y', ..., y^(d))``
augmented with ``x = int_0^t y``, so that ``exp(x) = y^(d)`` can be checked
step by step instead of by post-hoc quadrature.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import rk
from .rk import StepSizeUnderflow

T_D1 = math.pi / math.sqrt(2.0)
ETA = 0.1  # step cap as a fraction of the running distance to the pole
WINDOW = 16
WINDOW_DECADES = 2.0


class InvariantViolation(RuntimeError):
    """A computed jet broke absolute monotonicity."""


class NonMonotoneEstimate(RuntimeError):
    """The blow-up time predictor oscillates; y_max is probably too small."""


@dataclass(frozen=True)
class DerivativeJet:
    t: float
    jet: np.ndarray
    x: float = math.nan

    @property
    def d(self) -> int:
        return len(self.jet) - 1

    @property
    def y(self) -> float:
        return float(self.jet[0])


@dataclass(frozen=True)
class BlowupEstimate:
    T: float
    method: str  # "shooting-extrapolation" | "series-radius"
    uncertainty: float
    d: int

    def agrees_with(self, other: "BlowupEstimate", tol: float = 0.0) -> bool:
        return abs(self.T - other.T) <= max(tol, self.uncertainty + other.uncertainty)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    y_max: float = 1e8
    max_steps: int = 200_000
    h_max: float = math.inf

    def __post_init__(self):
        if not (0 < self.rel_tol < 1 and 0 < self.abs_tol < 1):
            raise ValueError("tolerances must lie in (0, 1)")
        if self.y_max < 1e3:
            raise ValueError("y_max must be at least 1e3")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class Trajectory:
    """Accepted steps of an integration, stored column-wise.

    ``jets[k, i]`` is y^(i)(t[k]) and ``x[k]`` is the running integral of y.
    Indexing and iteration yield :class:`DerivativeJet` objects.
    """

    t: np.ndarray
    jets: np.ndarray
    x: np.ndarray
    d: int = field(init=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.jets = np.atleast_2d(np.asarray(self.jets, dtype=float))
        self.x = np.asarray(self.x, dtype=float)
        self.d = self.jets.shape[1] - 1

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k) -> DerivativeJet:
        return DerivativeJet(float(self.t[k]), self.jets[k].copy(), float(self.x[k]))

    def __iter__(self) -> Iterator[DerivativeJet]:
        return (self[k] for k in range(len(self)))

    @property
    def y(self) -> np.ndarray:
        return self.jets[:, 0]

    def to_csv(self, path) -> None:
        header = ["t"] + [f"y{i}" for i in range(self.d + 1)] + ["x"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, jet, x in zip(self.t, self.jets, self.x):
                w.writerow([fmt(t)] + [fmt(v) for v in jet] + [fmt(x)])


def fmt(v: float) -> str:
    return f"{v:.17g}"


def _check_d(d: int) -> None:
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")


def cauchy_field(jet, d: int) -> np.ndarray:
    """Right-hand side of the companion first-order system.

    >>> cauchy_field([1.0, 2.0], 1)
    array([2., 2.])
    """
    jet = np.asarray(jet, dtype=float)
    if jet.shape != (d + 1,):
        raise ValueError(f"jet must have length d+1={d + 1}, got shape {jet.shape}")
    out = np.empty_like(jet)
    out[:-1] = jet[1:]
    out[-1] = jet[0] * jet[-1]
    return out


def initial_state(d: int) -> np.ndarray:
    state = np.zeros(d + 2)
    state[d] = 1.0
    return state


def _augmented_field(d: int):
    def f(_t, s):
        out = np.empty_like(s)
        out[:d] = s[1:d + 1]
        out[d] = s[0] * s[d]
        out[d + 1] = s[0]
        return out

    return f


def _running_pole_distance(state, d: int) -> float:
    y = state[0]
    return (d + 1) / y if y > 0 else math.inf


def integrate(d: int, config: IntegratorConfig = IntegratorConfig(),
              t_stop: Optional[float] = None, t_marks=()) -> Trajectory:
    """Integrate from t=0 until y >= config.y_max (or t reaches ``t_stop``).

    ``t_marks`` are times the stepper must land on exactly (they appear as
    samples of the returned trajectory). Every accepted step is checked
    against absolute monotonicity: each derivative is non-decreasing and
    y^(d) >= 1. Step size underflow propagates as :class:`StepSizeUnderflow`.
    """
    _check_d(d)
    f = _augmented_field(d)
    marks = sorted(float(m) for m in t_marks if m > 0)
    if t_stop is not None:
        marks = [m for m in marks if m < t_stop] + [float(t_stop)]
    pending = iter(marks)
    nxt = [next(pending, math.inf)]

    def cap(t, s):
        while nxt[0] - t <= 4 * np.finfo(float).eps * max(abs(t), 1.0):
            nxt[0] = next(pending, math.inf)
        return min(config.h_max, ETA * _running_pole_distance(s, d), nxt[0] - t)

    ts, states = [], []
    prev = None
    for t, s in rk.solve(f, 0.0, initial_state(d), rtol=config.rel_tol,
                         atol=config.abs_tol, max_step=cap):
        if prev is not None:
            if np.any(s[:d + 1] < prev[:d + 1]) or s[d] < 1.0:
                raise InvariantViolation(
                    f"absolute monotonicity broken at t={t!r}: {s[:d + 1]}")
        ts.append(t)
        states.append(s)
        prev = s
        if s[0] >= config.y_max or len(ts) >= config.max_steps:
            break
        if t_stop is not None and t_stop - t <= 4 * np.finfo(float).eps * max(t, 1.0):
            break
    states = np.array(states)
    return Trajectory(np.array(ts), states[:, :d + 1], states[:, d + 1])


def analytic_d1(t: float) -> DerivativeJet:
    """Closed-form jet for d=1: y = sqrt2 tan(t/sqrt2), y' = 1/cos^2(t/sqrt2)."""
    if not (0.0 <= t < T_D1):
        raise ValueError(f"t={t!r} outside [0, pi/sqrt(2))")
    return analytic_trajectory_d1([t])[0]


def analytic_trajectory_d1(times) -> Trajectory:
    """Vectorised :func:`analytic_d1` over a grid of times.

    In the second half of the interval the formulas are evaluated through
    the gap ``T - t`` (exact in floating point there), so that the oracle
    keeps full relative accuracy right up to the pole.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(times >= T_D1):
        raise ValueError("times outside [0, pi/sqrt(2))")
    r2 = math.sqrt(2.0)
    near = times > T_D1 / 2
    theta = np.where(near, (T_D1 - times) / r2, times / r2)
    sn, cs = np.sin(theta), np.cos(theta)
    # pick the denominator per branch before dividing, so t = 0 never divides by sin(0)
    num, den = np.where(near, cs, sn), np.where(near, sn, cs)
    y = r2 * num / den
    dy = 1.0 / den ** 2
    x = -2.0 * np.log(den)
    return Trajectory(times, np.column_stack([y, dy]), x)


def _window_indices(y: np.ndarray, k: int, decades: float) -> np.ndarray:
    """Indices of ``k`` samples geometrically spaced in y over the last decades."""
    y_last = y[-1]
    targets = y_last * np.logspace(-decades, 0.0, k)
    logy = np.log(np.maximum(y, np.finfo(float).tiny))
    idx = np.unique([int(np.argmin(np.abs(logy - math.log(v)))) for v in targets])
    return idx


def estimate_blowup_shooting(d: int, config: IntegratorConfig = IntegratorConfig(),
                             trajectory: Optional[Trajectory] = None) -> BlowupEstimate:
    """Blow-up time from the rate model T(t) ~ t + (d+1)/y(t).

    The predictor is evaluated on the last ``WINDOW`` samples (geometric in
    y over the last decades below y_max) and extrapolated linearly in 1/y to
    1/y = 0, weighting each sample by y since the predictor error scales like
    T - t. The uncertainty is the largest deviation of the raw predictor from
    the extrapolated value, floored by the integration tolerance.

    For d >= 3 the approach to the limit rate spirals, so the predictor is
    allowed to oscillate; it must however settle, i.e. its increments over the
    last third of the window must be smaller than over the first third.
    """
    _check_d(d)
    if d > 10:
        raise ValueError("the shooting model relies on the d <= 10 blow-up rate; "
                         "use the series estimator for d >= 11")
    traj = trajectory if trajectory is not None else integrate(d, config)
    if traj.y[-1] < config.y_max:
        raise StepSizeUnderflow("integration stopped before reaching y_max")
    idx = _window_indices(traj.y, WINDOW, WINDOW_DECADES)
    t, y = traj.t[idx], traj.y[idx]
    that = t + (d + 1) / y
    slope, intercept = np.polyfit(1.0 / y, that, 1, w=y / y[-1])
    floor = 10 * config.rel_tol * abs(intercept) + 8 * np.finfo(float).eps * abs(intercept)
    steps = np.abs(np.diff(that))
    third = max(1, len(steps) // 3)
    if steps[-third:].max() > max(steps[:third].max(), floor):
        raise NonMonotoneEstimate(
            f"predictor t+(d+1)/y does not settle over the window (d={d}); raise y_max")
    spread = float(np.max(np.abs(that - intercept)))
    return BlowupEstimate(float(intercept), "shooting-extrapolation",
                          max(spread, floor), d)
