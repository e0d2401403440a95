"""Taylor series of x = int_0^t y at the origin, and its radius of convergence.

x solves x^(d+1) = exp(x) with flat initial data. Writing b for the series
of exp(x), the coefficients obey

    n * b[n] = sum_{k=1..n} k * a[k] * b[n-k]
    a[n+d+1] = b[n] * n! / (n+d+1)!

Since x(w t) = x(t) for every (d+1)-th root of unity w, only the powers
t^((d+1)k) survive, and the singularities nearest to the origin sit at T*w.
The radius is therefore fitted on the subsequence c[k] = a[(d+1)k], a power
series in z = t^(d+1) with a single dominant singularity at z = T^(d+1).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ode_blowup import BlowupEstimate, fmt


class SeriesTooShort(ValueError):
    pass


@dataclass(frozen=True)
class SeriesCoefficients:
    """Scaled coefficients: ``a[n] = a_scaled[n] / rho**n`` (same for b)."""

    d: int
    a_scaled: np.ndarray
    b_scaled: np.ndarray
    rho: float

    @property
    def N(self) -> int:
        return len(self.a_scaled)

    @property
    def a(self) -> np.ndarray:
        n = np.arange(self.N)
        with np.errstate(under="ignore", over="ignore"):
            return self.a_scaled * np.power(self.rho, -n.astype(float))

    @property
    def b(self) -> np.ndarray:
        n = np.arange(self.N)
        with np.errstate(under="ignore", over="ignore"):
            return self.b_scaled * np.power(self.rho, -n.astype(float))

    def evaluate(self, t: float) -> float:
        """Partial sum of the series for x at ``t`` (|t| below the radius)."""
        n = np.arange(self.N)
        return float(np.sum(self.a_scaled * (t / self.rho) ** n))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "a_n", "a_n_scaled", "rho"])
            for n, (a, s) in enumerate(zip(self.a, self.a_scaled)):
                w.writerow([n, fmt(a), fmt(s), fmt(self.rho)])


def _recurrence(d: int, N: int, rho: float):
    a = np.zeros(N)
    b = np.zeros(N)
    b[0] = 1.0
    k = np.arange(N, dtype=float)
    rho_step = rho ** (d + 1)
    for n in range(N):
        if n > 0:
            # exp of a series; scale-free since rho^k * rho^(n-k) = rho^n
            b[n] = np.dot(k[1:n + 1] * a[1:n + 1], b[n - 1::-1][:n]) / n
        m = n + d + 1
        if m < N:
            # n!/(n+d+1)! without forming factorials
            ratio = math.exp(math.lgamma(n + 1) - math.lgamma(m + 1))
            a[m] = b[n] * ratio * rho_step
    return a, b


def taylor_coefficients(d: int, N: int, rho: float | None = None) -> SeriesCoefficients:
    """First ``N`` Taylor coefficients of x and exp(x) at the origin.

    ``rho`` is the renormalisation scale; by default a pilot run (at least 64 terms)
    estimates the radius and the coefficients are stored as a[n] * rho^n so
    that they neither underflow nor overflow for large N.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if N < d + 2:
        raise SeriesTooShort(f"N={N} must be at least d+2={d + 2}")
    if rho is None:
        rho = 1.0
        n_pilot = max(64, 12 * (d + 1))
        if N > n_pilot:
            c = taylor_coefficients(d, n_pilot, rho=1.0).a_scaled[::d + 1]
            rho = (c[-2] / c[-1]) ** (1.0 / (d + 1))
    a, b = _recurrence(d, N, rho)
    return SeriesCoefficients(d, a, b, float(rho))


def _radius_fit(coeffs: SeriesCoefficients, quadratic: bool = False, halve: bool = False):
    """Domb-Sykes fit on the nonzero subsequence; returns (T, sigma_T, fit)."""
    p = coeffs.d + 1
    c = coeffs.a_scaled[::p]  # c[k] = a[pk] * rho^(pk)
    if halve:
        c = c[: (len(c) + 1) // 2]
    K = len(c) - 1
    if K < 4:
        raise SeriesTooShort(f"only {K} nonzero coefficients; increase N")
    ks = np.arange(2, K + 1)
    r = c[2:] / c[1:-1]  # c[0] = x(0) = 0
    tail = ks >= max(2, (K + 1) // 2)
    kt, rt = ks[tail], r[tail]
    # spiralling corrections make the tail wobble for d >= 5; only the trend is checked
    if np.any(rt <= 0) or rt[-1] <= rt[0]:
        raise SeriesTooShort("ratio tail is not positive and increasing; increase N")
    deg = 2 if quadratic and len(kt) > 6 else 1
    X = np.vander(1.0 / kt, deg + 1, increasing=True)
    W = kt.astype(float) ** 2
    sw = np.sqrt(W)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], rt * sw, rcond=None)
    resid = rt - X @ coef
    dof = max(len(kt) - (deg + 1), 1)
    s2 = float(np.sum(W * resid**2) / dof)
    cov = s2 * np.linalg.inv((X * W[:, None]).T @ X)
    inv_z = coef[0]  # 1/Z in scaled units: Z = (T/rho)^p
    sigma_inv_z = math.sqrt(max(cov[0, 0], 0.0))
    T = coeffs.rho * inv_z ** (-1.0 / p)
    sigma_T = T * sigma_inv_z / (p * inv_z)
    return T, sigma_T, coef


def estimate_blowup_series(coeffs: SeriesCoefficients) -> BlowupEstimate:
    """Blow-up time as the radius of convergence of the series of x.

    Ratios c[k]/c[k-1] of the nonzero coefficients are fitted linearly
    against 1/k (weighted least squares, weights k^2, last half of the
    ratios); the intercept is 1/T^(d+1). The uncertainty combines the
    standard error of the intercept, the shift of the intercept when a
    quadratic term in 1/k is admitted, the shift when only the first half of
    the coefficients is used, and a rounding floor.
    """
    T, sigma, _ = _radius_fit(coeffs)
    T2, _, _ = _radius_fit(coeffs, quadratic=True)
    shifts = [sigma, abs(T2 - T), 64 * np.finfo(float).eps * T]
    try:
        shifts.append(abs(_radius_fit(coeffs, halve=True)[0] - T))
    except SeriesTooShort:
        pass
    return BlowupEstimate(float(T), "series-radius", float(max(shifts)), coeffs.d)
