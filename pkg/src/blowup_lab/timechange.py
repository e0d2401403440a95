"""The u -> v -> w cascade of bounded functionals of a blow-up trajectory.

u is an algebraic transform of the jet, v reparameterises u by logarithmic
time s = ln(T/(T-t)) - 1, and w reparameterises v by the integrated clock
tau = int_0^s dr / v0(r), in which the dynamics become the autonomous
Lotka-Volterra system. Each stage is checked residually against the ODE it
should satisfy; derivatives are centred finite differences on the sample
grid and integrals are trapezoidal, so residuals are second order in the
grid spacing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ode_blowup import BlowupEstimate, Trajectory, fmt


class TooFewSamples(ValueError):
    pass


class InconsistentBlowupTime(ValueError):
    pass


class InsufficientCoverage(ValueError):
    pass


class DegenerateClock(ValueError):
    """v0 vanishes (or nearly): the tau clock cannot be built."""


def fd_derivative(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order centred derivative on a non-uniform grid (interior points).

    ``f`` may be 1-D or have samples along axis 0.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if len(x) < 3:
        raise TooFewSamples("need at least 3 samples for a centred difference")
    hm = (x[1:-1] - x[:-2])
    hp = (x[2:] - x[1:-1])
    if f.ndim > 1:
        hm = hm[:, None]
        hp = hp[:, None]
    return (hm**2 * f[2:] - hp**2 * f[:-2] + (hp**2 - hm**2) * f[1:-1]) / (hm * hp * (hm + hp))


def cumtrapz(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral, starting at 0."""
    out = np.zeros_like(np.asarray(f, dtype=float))
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x)[(...,) + (None,) * (np.ndim(f) - 1)],
                        axis=0)
    return out


def _write_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) for v in row])


@dataclass
class UTrajectory:
    t: np.ndarray
    u: np.ndarray  # shape (n, d+1)
    T: float
    x: np.ndarray  # running integral of y at the same times (nan if unknown)
    dT_sensitivity: np.ndarray  # d u0 / d T

    @property
    def d(self) -> int:
        return self.u.shape[1] - 1

    @property
    def bound(self) -> float:
        """Run-reported constant C with u_i <= C on every sample."""
        return float(self.u.max())

    def to_csv(self, path) -> None:
        _write_csv(path, ["t"] + [f"u{i}" for i in range(self.d + 1)],
                   [self.t] + list(self.u.T))


@dataclass
class VTrajectory:
    s: np.ndarray
    v: np.ndarray  # shape (n, d+1)
    T: float
    t0: float
    x: np.ndarray
    identity_defect: float  # max |v0 - e^s int_s^inf v1 e^-r dr|, tail modelled
    tail_error: float  # bound on the part of the defect due to the tail model

    @property
    def d(self) -> int:
        return self.v.shape[1] - 1

    def to_csv(self, path) -> None:
        _write_csv(path, ["s"] + [f"v{i}" for i in range(self.d + 1)],
                   [self.s] + list(self.v.T))


@dataclass
class WTrajectory:
    tau: np.ndarray
    w: np.ndarray  # shape (n, d)
    psi: np.ndarray  # psi(tau) = s at the same samples
    x: np.ndarray

    @property
    def d(self) -> int:
        return self.w.shape[1]

    def to_csv(self, path) -> None:
        _write_csv(path, ["tau"] + [f"w{i}" for i in range(1, self.d + 1)] + ["psi"],
                   [self.tau] + list(self.w.T) + [self.psi])


def _T_value(T) -> float:
    return float(T.T) if isinstance(T, BlowupEstimate) else float(T)


def build_u(trajectory: Trajectory, T) -> UTrajectory:
    """u0 = 1/((T-t) y), u_i = y^(i) / (y y^(i-1)); samples with t <= 0 dropped."""
    T = _T_value(T)
    t = trajectory.t
    if T <= t.max():
        raise InconsistentBlowupTime(f"T={T!r} does not exceed the last sample time {t.max()!r}")
    keep = t > 0
    t, jets, x = t[keep], trajectory.jets[keep], trajectory.x[keep]
    y = jets[:, 0]
    if np.any(y <= 0):
        raise ValueError("y must be positive on the samples used")
    gap = T - t
    u = np.empty_like(jets)
    u[:, 0] = 1.0 / (gap * y)
    u[:, 1:] = jets[:, 1:] / (y[:, None] * jets[:, :-1])
    return UTrajectory(t, u, T, x, -u[:, 0] / gap)


def u_rhs(u: np.ndarray) -> np.ndarray:
    """(T - t) times the right-hand side of the u system, row-wise."""
    u = np.atleast_2d(u)
    d = u.shape[1] - 1
    out = np.empty_like(u)
    out[:, 0] = u[:, 0] - u[:, 1]
    nxt = np.concatenate([u[:, 2:], np.ones((len(u), 1))], axis=1)
    out[:, 1:] = u[:, 1:] * (nxt - u[:, 1:2] - u[:, 1:]) / u[:, 0:1]
    return out


def v_rhs(v: np.ndarray) -> np.ndarray:
    """Right-hand side of the v system (same algebra as u in log time)."""
    return u_rhs(v)


def w_rhs(w: np.ndarray) -> np.ndarray:
    """Right-hand side of the Lotka-Volterra system for w, row-wise."""
    w = np.atleast_2d(w)
    nxt = np.concatenate([w[:, 1:], np.ones((len(w), 1))], axis=1)
    return w * (nxt - w[:, 0:1] - w)


def residual_system_u(u: UTrajectory, T=None) -> np.ndarray:
    """Per equation, max over interior samples of |du/dt - rhs| * (T - t)."""
    T = u.T if T is None else _T_value(T)
    if len(u.t) < 3:
        raise TooFewSamples("need at least 3 samples")
    du = fd_derivative(u.t, u.u)
    gap = (T - u.t[1:-1])[:, None]
    return np.max(np.abs(du * gap - u_rhs(u.u[1:-1])), axis=0)


def phi(s, T: float):
    return T * (1.0 - np.exp(-(1.0 + np.asarray(s, dtype=float))))


def phi_inverse(t, T: float):
    return np.log(T / (T - np.asarray(t, dtype=float))) - 1.0


def build_v(u: UTrajectory, T=None, *, min_span: float = 3.0) -> VTrajectory:
    """Reparameterise u by s = phi^-1(t) and check the v0 integral identity.

    The tail of int_s^inf v1 e^-r dr beyond the last sample S is modelled as
    c e^-S with c = 1/(d+1) for d <= 10 (the proven limit of v1) and the last
    sample of v1 otherwise; ``tail_error`` bounds the contribution of that
    modelling choice, i.e. |v1(S) - c| in the worst sample.
    """
    T = u.T if T is None else _T_value(T)
    s_all = phi_inverse(u.t, T)
    keep = s_all >= -1e-12
    if not np.any(keep):
        raise InsufficientCoverage("no samples at or beyond t0 = (1 - 1/e) T")
    s = np.maximum(s_all[keep], 0.0)
    if s[0] > 1e-6:
        raise InsufficientCoverage(f"samples start at s={s[0]:.3g}; they must reach back to t0")
    if s[-1] < min_span:
        raise InsufficientCoverage(f"samples stop at s={s[-1]:.3g} < {min_span}")
    v = u.u[keep]
    predicted, c = _v0_from_v1(s, v)
    defect = float(np.max(np.abs(v[:, 0] - predicted)))
    return VTrajectory(s, v, T, (1 - 1 / math.e) * T, u.x[keep], defect,
                       float(abs(v[-1, 1] - c)))


def _v0_from_v1(s: np.ndarray, v: np.ndarray):
    d = v.shape[1] - 1
    c = 1.0 / (d + 1) if d <= 10 else float(v[-1, 1])
    inner = cumtrapz(s, v[:, 1] * np.exp(-s))
    # int_s^S v1 e^-r dr plus the modelled tail c e^-S
    return np.exp(s) * (inner[-1] - inner) + c * np.exp(s - s[-1]), c


def residual_system_v(v: VTrajectory) -> np.ndarray:
    """Per equation, max over interior samples of |dv/ds - rhs|."""
    dv = fd_derivative(v.s, v.v)
    return np.max(np.abs(dv - v_rhs(v.v[1:-1])), axis=0)


def identity_v0_defect(v: VTrajectory, interior_only: float = 0.0) -> float:
    """Defect of v0(s) = e^s int_s^inf v1(r) e^-r dr on samples s <= S - margin.

    With ``interior_only`` > 0 the samples within that distance of the last
    one are skipped; their defect is dominated by the tail model.
    """
    predicted, _ = _v0_from_v1(v.s, v.v)
    mask = v.s <= v.s[-1] - interior_only
    return float(np.max(np.abs(v.v[mask, 0] - predicted[mask])))


def build_w(v: VTrajectory, *, v0_floor: float = 1e-12) -> WTrajectory:
    """tau = psi^-1(s) = int_0^s dr / v0(r); w(tau) = (v1, ..., vd)(s)."""
    v0 = v.v[:, 0]
    if np.any(v0 <= v0_floor):
        raise DegenerateClock(f"v0 drops to {v0.min():.3g}")
    tau = cumtrapz(v.s, 1.0 / v0)
    if np.any(np.diff(tau) <= 0):
        raise DegenerateClock("tau clock is not strictly increasing")
    return WTrajectory(tau, v.v[:, 1:].copy(), v.s.copy(), v.x)


def psi_of(w: WTrajectory, tau):
    """psi evaluated by monotone (linear) interpolation of the sampled map."""
    return np.interp(tau, w.tau, w.psi)


def psi_inverse_of(w: WTrajectory, s):
    return np.interp(s, w.psi, w.tau)


def residual_system_w(w: WTrajectory) -> np.ndarray:
    """Per equation, max over interior samples of |dw/dtau - rhs|."""
    dw = fd_derivative(w.tau, w.w)
    return np.max(np.abs(dw - w_rhs(w.w[1:-1])), axis=0)


def residual_mean_identity(v: VTrajectory) -> float:
    """Defect of ln v0(s) - ln v0(0) = s - int_0^s v1/v0, the identity behind
    psi(t)/t -> 1/(d+1)."""
    lhs = np.log(v.v[:, 0] / v.v[0, 0])
    rhs = v.s - cumtrapz(v.s, v.v[:, 1] / v.v[:, 0])
    return float(np.max(np.abs(lhs - rhs)))


def round_trip_defect(w: WTrajectory) -> float:
    """max |psi^-1(s) - int_{phi(0)}^{phi(s)} y|, using the integrated x."""
    if np.all(np.isnan(w.x)):
        raise ValueError("trajectory carries no integral of y")
    return float(np.max(np.abs(w.tau - (w.x - w.x[0]))))


def mean_growth(w: WTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Running (1/tau) int_0^tau w1 and psi(tau)/tau, both tending to 1/(d+1)."""
    tau = w.tau[1:]
    avg = cumtrapz(w.tau, w.w[:, 0])[1:] / tau
    return avg, w.psi[1:] / tau


def u_limits(d: int) -> np.ndarray:
    """Limits (1 v i)/(d+1) of u_i at the blow-up time, established for d <= 10."""
    return np.maximum(1, np.arange(d + 1)) / (d + 1)


def log_time_grid(T: float, s_max: float, n: int) -> np.ndarray:
    """Times phi(s) for n samples uniform in s over [0, s_max]."""
    return phi(np.linspace(0.0, s_max, n), T)


@dataclass
class CascadeResult:
    u: UTrajectory
    v: VTrajectory
    w: WTrajectory


def cascade(trajectory: Trajectory, T, *, min_span: float = 3.0) -> CascadeResult:
    u = build_u(trajectory, T)
    v = build_v(u, min_span=min_span)
    return CascadeResult(u, v, build_w(v))


def residual_report(c: CascadeResult) -> dict[str, float]:
    """Every residual of the cascade, keyed by name (max over equations)."""
    report = {
        "system_u": float(residual_system_u(c.u).max()),
        "system_v": float(residual_system_v(c.v).max()),
        "identity_v0": identity_v0_defect(c.v),
        "system_w": float(residual_system_w(c.w).max()),
        "identity_mean": residual_mean_identity(c.v),
    }
    if not np.all(np.isnan(c.w.x)):
        report["round_trip"] = round_trip_defect(c.w)
    return report
