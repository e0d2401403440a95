"""The Lotka-Volterra system w_i' = w_i (b_i - (A w)_i) behind the blow-up rate.

    w_i' = w_i (w_{i+1} - w_1 - w_i),   i < d
    w_d' = w_d (1 - w_1 - w_d)

A is 2 / -1 on the first row, 1 on the rest of the first column, identity on
the rest of the diagonal and -1 on the superdiagonal; b = e_d. The interior
equilibrium is w* = (1, ..., d) / (d+1).
"""
from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import rk
from .ode_blowup import fmt

LOG_UNIFORM_RANGE = (0.05, 2.0)


class PositivityViolation(RuntimeError):
    pass


class MonotonicityViolation(RuntimeError):
    """max(w_1, ..., w_d, 1) increased along the run."""


def interaction_matrix(d: int) -> list[list[int]]:
    if d < 1:
        raise ValueError("d must be >= 1")
    A = [[0] * d for _ in range(d)]
    A[0][0] = 2
    if d > 1:
        A[0][1] = -1
    for i in range(1, d):
        A[i][0] += 1
        A[i][i] += 1
        if i + 1 < d:
            A[i][i + 1] = -1
    return A


@dataclass(frozen=True)
class LVModel:
    d: int
    A: tuple = field(init=False, repr=False)
    b: tuple = field(init=False, repr=False)
    w_star: tuple = field(init=False, repr=False)

    def __post_init__(self):
        A = interaction_matrix(self.d)
        object.__setattr__(self, "A", tuple(tuple(r) for r in A))
        object.__setattr__(self, "b", tuple([0] * (self.d - 1) + [1]))
        object.__setattr__(self, "w_star",
                           tuple(Fraction(i, self.d + 1) for i in range(1, self.d + 1)))

    @property
    def A_float(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @property
    def b_float(self) -> np.ndarray:
        return np.array(self.b, dtype=float)

    @property
    def w_star_float(self) -> np.ndarray:
        return np.array([float(q) for q in self.w_star])

    def check_equilibrium_exact(self) -> bool:
        """A w* = b in rational arithmetic."""
        return all(sum(Fraction(a) * w for a, w in zip(row, self.w_star)) == bi
                   for row, bi in zip(self.A, self.b))


def lv_field(w, model: LVModel) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (model.d,):
        raise ValueError(f"w must have length {model.d}")
    out = np.empty_like(w)
    out[:-1] = w[:-1] * (w[1:] - w[0] - w[:-1])
    out[-1] = w[-1] * (1.0 - w[0] - w[-1])
    return out


def _field(model: LVModel):
    def f(_t, w):
        out = np.empty_like(w)
        out[:-1] = w[:-1] * (w[1:] - w[0] - w[:-1])
        out[-1] = w[-1] * (1.0 - w[0] - w[-1])
        return out

    return f


@dataclass
class LVTrajectory:
    d: int
    t: np.ndarray
    w: np.ndarray  # (n, d)
    integral: np.ndarray  # (n, d) trapezoid int_0^t w on accepted steps
    quad_error: np.ndarray  # (n,) accumulated |endpoint-corrected minus trapezoid|
    w0: np.ndarray
    tol: float

    @property
    def averages(self) -> np.ndarray:
        """w_bar(t) = (1/t) int_0^t w; row 0 (t = 0) is w0."""
        out = np.empty_like(self.integral)
        out[0] = self.w0
        out[1:] = self.integral[1:] / self.t[1:, None]
        return out

    @property
    def eps(self) -> np.ndarray:
        """eps_i(t) = (1/t) ln(w_i(t)/w_i(0)); row 0 is 0."""
        out = np.zeros_like(self.w)
        out[1:] = np.log(self.w[1:] / self.w0) / self.t[1:, None]
        return out

    @property
    def M(self) -> np.ndarray:
        return np.maximum(self.w.max(axis=1), 1.0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t"] + [f"w{i}" for i in range(1, self.d + 1)])
            for t, row in zip(self.t, self.w):
                out.writerow([fmt(t)] + [fmt(v) for v in row])

    def averages_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t"] + [f"avg{i}" for i in range(1, self.d + 1)])
            for t, row in zip(self.t, self.averages):
                out.writerow([fmt(t)] + [fmt(v) for v in row])


def simulate(model: LVModel, w0, t_end: float, tol: float = 1e-10, *,
             h_max: float = math.inf, t_marks: Sequence[float] = (),
             m_slack: Optional[float] = None) -> LVTrajectory:
    """Integrate the system from ``w0`` to ``t_end`` with the shared RK core.

    Positivity is enforced by step rejection; a candidate with a non-positive
    coordinate is never accepted (and never clipped). ``max(w, 1)`` must not
    increase by more than ``m_slack`` (default ``100 * tol``, the local error
    allowance) between accepted steps. Integrals of w are accumulated by the
    trapezoid rule on accepted steps; ``quad_error`` accumulates the size of
    the endpoint-derivative correction h^2/12 (w'(a) - w'(b)), a conservative
    estimate of the trapezoid error.
    """
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != (model.d,):
        raise ValueError(f"w0 must have length {model.d}")
    if np.any(w0 <= 0):
        raise PositivityViolation("initial condition must be componentwise positive")
    slack = 100 * tol if m_slack is None else m_slack
    f = _field(model)
    marks = iter(sorted(m for m in t_marks if 0 < m < t_end))
    nxt = [next(marks, t_end)]

    def cap(t, _w):
        while nxt[0] - t <= 4 * np.finfo(float).eps * max(t, 1.0) and nxt[0] < t_end:
            nxt[0] = next(marks, t_end)
        return min(h_max, nxt[0] - t)

    ts, ws = [], []
    integ, qerr = [np.zeros(model.d)], [0.0]
    m_prev = None
    fw_prev = None
    try:
        for t, w in rk.solve(f, 0.0, w0, rtol=tol, atol=tol * 1e-2, max_step=cap,
                             admissible=lambda c: bool(np.all(c > 0))):
            m = max(float(w.max()), 1.0)
            if m_prev is not None and m > m_prev * (1 + slack):
                raise MonotonicityViolation(f"M increased from {m_prev!r} to {m!r} at t={t!r}")
            fw = f(t, w)
            if ts:
                h = t - ts[-1]
                integ.append(integ[-1] + 0.5 * h * (w + ws[-1]))
                qerr.append(qerr[-1] + float(np.max(np.abs(h * h / 12 * (fw_prev - fw)))))
            ts.append(t)
            ws.append(w)
            m_prev = min(m, m_prev) if m_prev is not None else m
            fw_prev = fw
            if t_end - t <= 4 * np.finfo(float).eps * max(t, 1.0):
                break
    except rk.StepSizeUnderflow as exc:
        raise PositivityViolation(f"could not keep the state positive: {exc}") from exc
    return LVTrajectory(model.d, np.array(ts), np.array(ws), np.array(integ),
                        np.array(qerr), w0.copy(), tol)


def _simulate_args(args):
    return simulate(*args[:4], **args[4])


def simulate_many(model: LVModel, initial_conditions, t_end: float, tol: float = 1e-10,
                  workers: int = 1, **kwargs) -> list[LVTrajectory]:
    """Independent runs, optionally in worker processes; output order follows input."""
    jobs = [(model, w0, t_end, tol, kwargs) for w0 in initial_conditions]
    if workers <= 1:
        return [_simulate_args(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_args, jobs))


def random_initial_conditions(d: int, n: int, seed: int) -> np.ndarray:
    """Log-uniform draws on [0.05, 2]^d with a fixed seed."""
    lo, hi = LOG_UNIFORM_RANGE
    rng = np.random.default_rng(seed)
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=(n, d)))


def time_average_defect(traj: LVTrajectory, model: LVModel) -> np.ndarray:
    """max_i |A w_bar(t) - b + eps(t)| at every sample with t > 0."""
    A, b = model.A_float, model.b_float
    wbar, eps = traj.averages[1:], traj.eps[1:]
    return np.max(np.abs(wbar @ A.T - b + eps), axis=1)


@dataclass
class TimeAverageReport:
    t_end: float
    defect: float  # at the final time
    tolerance: float  # 10 x quadrature error estimate / t, plus rounding
    w_bar: np.ndarray
    deviation: np.ndarray  # w_bar - w*

    @property
    def ok(self) -> bool:
        return self.defect <= self.tolerance


def time_average_check(traj: LVTrajectory, model: LVModel) -> TimeAverageReport:
    if traj.t[-1] <= 0:
        raise ValueError("t_end must be positive")
    defects = time_average_defect(traj, model)
    t = traj.t[-1]
    tol = quadrature_tolerance(traj, model)[-1]
    wbar = traj.averages[-1]
    return TimeAverageReport(float(t), float(defects[-1]), float(tol), wbar,
                             wbar - model.w_star_float)


def quadrature_tolerance(traj: LVTrajectory, model: LVModel) -> np.ndarray:
    """Per-sample (t > 0) allowance for the time-average identity defect.

    The identity is exact in continuum; numerically its defect is the
    trapezoid error of int w (times the row sums of |A|) plus the ODE
    error in ln w, both divided by t.
    """
    t = traj.t[1:]
    row = float(np.abs(model.A_float).sum(axis=1).max())
    n_steps = np.arange(1, len(traj.t))
    rounding = 1e-13 * n_steps + traj.tol * 100 * n_steps ** 0.5
    return (10 * row * traj.quad_error[1:] + rounding) / t


def distance_to_star(traj: LVTrajectory, model: Optional[LVModel] = None) -> np.ndarray:
    """Columns (t, ||w(t) - w*||_2)."""
    ws = (model or LVModel(traj.d)).w_star_float
    return np.column_stack([traj.t, np.linalg.norm(traj.w - ws, axis=1)])


def permanence_floor(traj: LVTrajectory, t_min: float = 1.0) -> float:
    """min over i and samples with t >= t_min of w_i(t)."""
    mask = traj.t >= min(t_min, traj.t[-1])
    return float(traj.w[mask].min())


def lyapunov_value(w, lam, model: LVModel) -> np.ndarray:
    """V(w) = sum lam_i (w_i - w*_i - w*_i ln(w_i / w*_i)), row-wise."""
    ws = model.w_star_float
    w = np.atleast_2d(w)
    return (np.asarray(lam, dtype=float) * (w - ws - ws * np.log(w / ws))).sum(axis=1)


@dataclass
class DescentReport:
    min_V: float  # must be >= 0
    V_zero_off_star: bool  # V == 0 at a sample away from w*
    identity_residual: float  # max |dV/dt (FD) + <w-w*, M/2 (w-w*)>|
    max_increase: float  # largest increase of V between consecutive samples
    positive_definite: bool

    @property
    def max_violation(self) -> float:
        v = max(0.0, -self.min_V, self.identity_residual)
        if self.positive_definite:
            v = max(v, self.max_increase)
        return v


def lyapunov_descent_check(traj: LVTrajectory, lam, model: LVModel,
                           increase_slack: float = 0.0) -> DescentReport:
    """Evaluate V along the run and compare its derivative with the quadratic form."""
    from .lyapunov_feasibility import build_matrix

    lam = np.asarray(lam, dtype=float)
    M = build_matrix(lam)
    pd = bool(np.linalg.eigvalsh(M).min() > 0)
    ws = model.w_star_float
    V = lyapunov_value(traj.w, lam, model)
    dev = traj.w - ws
    q = -0.5 * np.einsum("ij,jk,ik->i", dev, M, dev)
    from .timechange import fd_derivative
    dV = fd_derivative(traj.t, V)
    resid = float(np.max(np.abs(dV - q[1:-1]))) if len(V) >= 3 else 0.0
    far = np.linalg.norm(dev, axis=1) > 1e-6
    incr = np.diff(V)
    return DescentReport(float(V.min()), bool(np.any((V <= 0) & far)), resid,
                         float(max(incr.max(initial=0.0) - increase_slack, 0.0)), pd)


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]) -> Optional[list[Fraction]]:
    """Gauss-Jordan over the rationals; None if singular."""
    n = len(rows)
    M = [list(r) + [v] for r, v in zip(rows, rhs)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            return None
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        M[c] = [v / piv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                fac = M[r][c]
                M[r] = [a - fac * b for a, b in zip(M[r], M[c])]
    return [M[r][n] for r in range(n)]


def stationary_points(model: LVModel, supports=None) -> list[tuple[Fraction, ...]]:
    """Non-negative stationary points, one per support set with a regular solve.

    On a support S the stationarity conditions read (A w)_S = b_S with
    w vanishing off S. ``supports`` defaults to every subset of coordinates.
    """
    d = model.d
    if supports is None:
        supports = (S for r in range(d + 1) for S in itertools.combinations(range(d), r))
    found = []
    for S in supports:
        S = tuple(S)
        w = [Fraction(0)] * d
        if S:
            rows = [[Fraction(model.A[i][j]) for j in S] for i in S]
            sol = _solve_exact(rows, [Fraction(model.b[i]) for i in S])
            if sol is None or any(v < 0 for v in sol):
                continue
            for j, v in zip(S, sol):
                w[j] = v
        if all(_exact_field(w, model)[i] == 0 for i in range(d)):
            found.append(tuple(w))
    return sorted(set(found))


def _exact_field(w, model: LVModel):
    d = model.d
    return [w[i] * (model.b[i] - sum(model.A[i][j] * w[j] for j in range(d)))
            for i in range(d)]


def psi(w, model: LVModel):
    """Psi(w) = sum_i (b - A w)_i = 1 - (d+1) w_1."""
    return 1 - (model.d + 1) * w[0]


@dataclass
class BoundaryReport:
    d: int
    cascade_gives_w_star: bool
    boundary_points: list
    psi_values: list
    exhaustive: bool

    @property
    def ok(self) -> bool:
        return (self.cascade_gives_w_star
                and all(p[0] == 0 for p in self.boundary_points)
                and all(v == 1 for v in self.psi_values))


def boundary_psi_check(model: LVModel, *, max_exhaustive_d: int = 12, samples: int = 2000,
                       seed: int = 0) -> BoundaryReport:
    """Every boundary stationary point has w_1 = 0, hence Psi = 1 > 0.

    The cascade part is exact: w_1 > 0 forces w_{i+1} = (i+1) w_1 and then
    (d+1) w_1 = 1, i.e. w = w*. Boundary stationary points are enumerated over
    all support sets for d <= ``max_exhaustive_d`` and over ``samples`` random
    proper supports beyond that.
    """
    d = model.d
    # w_i = c_i * w_1 with integer c_i; F_i = 0 and w_i > 0 force c_{i+1} = c_1 + c_i
    c = [1]
    for _ in range(d - 1):
        c.append(c[0] + c[-1])
    w1 = Fraction(1, 1 + c[-1])  # F_d = 0: 1 - w_1 - c_d w_1 = 0
    cascade = tuple(ci * w1 for ci in c) == model.w_star
    if d <= max_exhaustive_d:
        pts = stationary_points(model)
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        supports = set()
        for _ in range(samples):
            mask = rng.random(d) < rng.random()
            supports.add(tuple(np.flatnonzero(mask)))
        supports.add(())
        pts = stationary_points(model, supports)
        exhaustive = False
    boundary = [p for p in pts if any(v == 0 for v in p)]
    return BoundaryReport(d, cascade, boundary, [psi(p, model) for p in boundary], exhaustive)
