"""Poissonian burning with ignition intensity dx (x) y^(d)(t) dt.

Each atom (x, s) starts a fire at time s which grows as a 1-norm ball of
radius (t - s)/2. A point z is therefore burned at time t iff

    min over atoms of  s + 2 ||x - z||_1  <=  t.

Since int_0^t y^(d) = y^(d-1)(t) and int_0^t (t-s)^d/d! y^(d)(s) ds = x(t),
the probability that a fixed point is still unburned at t is
exp(-x(t)) = 1 / y^(d)(t).
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .ode_blowup import (T_D1, IntegratorConfig, Trajectory, estimate_blowup_shooting, fmt,
                         integrate)

# expected number of unburned probes below which an MC column is not reported
MIN_EXPECTED_HITS = 10.0
BURN_H_MAX = 0.01


class BeyondBlowup(ValueError):
    """t_max is at or beyond the blow-up time: the expected atom count is infinite."""


class DilationTooSmall(ValueError):
    pass


class TrajectoryTooShort(ValueError):
    pass


@dataclass(frozen=True)
class PoissonAtom:
    x: tuple
    s: float


@dataclass(frozen=True)
class BurnWindow:
    d: int
    R: float
    t_max: float
    dilation: float = math.nan  # defaults to t_max / 2

    def __post_init__(self):
        if self.d < 1 or self.R <= 0 or self.t_max < 0:
            raise ValueError("need d >= 1, R > 0 and t_max >= 0")
        if math.isnan(self.dilation):
            object.__setattr__(self, "dilation", self.t_max / 2)
        if self.dilation < self.t_max / 2:
            raise DilationTooSmall(f"dilation {self.dilation!r} < t_max/2 = {self.t_max / 2!r}")

    @property
    def half_width(self) -> float:
        return self.R + self.dilation

    @property
    def volume(self) -> float:
        return (2 * self.half_width) ** self.d


@dataclass
class AtomSample:
    """Atoms stored column-wise; iterating yields :class:`PoissonAtom`."""

    x: np.ndarray  # (n, d)
    s: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.s)

    def __getitem__(self, k) -> PoissonAtom:
        return PoissonAtom(tuple(float(v) for v in self.x[k]), float(self.s[k]))

    def __iter__(self) -> Iterator[PoissonAtom]:
        return (self[k] for k in range(len(self)))


def _as_arrays(atoms, d: int):
    if isinstance(atoms, AtomSample):
        return atoms.x, atoms.s
    atoms = list(atoms)
    if not atoms:
        return np.zeros((0, d)), np.zeros(0)
    return np.array([a.x for a in atoms], dtype=float).reshape(len(atoms), d), \
        np.array([a.s for a in atoms], dtype=float)


@lru_cache(maxsize=32)
def blowup_time(d: int) -> float:
    return T_D1 if d == 1 else estimate_blowup_shooting(d).T


def burn_trajectory(d: int, t_max: float, marks: Sequence[float] = (),
                    rel_tol: float = 1e-13) -> Trajectory:
    """Jets on [0, t_max] with steps <= 0.01 and exact samples at ``marks``."""
    if t_max >= blowup_time(d):
        raise BeyondBlowup(f"t_max={t_max!r} >= T={blowup_time(d)!r}")
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=1e-15, y_max=1e300,
                           max_steps=10_000_000, h_max=BURN_H_MAX)
    return integrate(d, cfg, t_stop=t_max, t_marks=tuple(marks))


def _cumulative(jets: Trajectory) -> np.ndarray:
    """y^(d-1) along the trajectory: the integrated intensity."""
    return jets.jets[:, jets.d - 1]


def _check_cover(jets: Trajectory, t: float) -> None:
    if t > jets.t[-1] * (1 + 4 * np.finfo(float).eps):
        raise TrajectoryTooShort(f"trajectory stops at {jets.t[-1]!r} < {t!r}")


def expected_count(window: BurnWindow, jets: Trajectory) -> float:
    _check_cover(jets, window.t_max)
    F = _interp_cumulative(jets, window.t_max)
    return window.volume * F


def _interp_cumulative(jets: Trajectory, t: float) -> float:
    d = jets.d
    # Hermite data: (y^(d-1))' = y^(d)
    return float(CubicHermiteSpline(jets.t, jets.jets[:, d - 1], jets.jets[:, d])(t))


class _TimeSampler:
    """Inverse CDF of the ignition times on [0, t_max] by monotone interpolation."""

    def __init__(self, jets: Trajectory, t_max: float):
        _check_cover(jets, t_max)
        F = _cumulative(jets)
        keep = jets.t < t_max
        t = np.append(jets.t[keep], t_max)
        Fv = np.append(F[keep], _interp_cumulative(jets, t_max))
        self.total = float(Fv[-1])
        self._inv = PchipInterpolator(Fv / self.total, t) if self.total > 0 else None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self._inv(u)


def _draw(rng: np.random.Generator, window: BurnWindow, sampler: _TimeSampler) -> AtomSample:
    mean = window.volume * sampler.total
    n = int(rng.poisson(mean)) if mean > 0 else 0
    hw = window.half_width
    x = rng.uniform(-hw, hw, size=(n, window.d))
    s = sampler(rng.uniform(0.0, 1.0, size=n)) if n else np.zeros(0)
    return AtomSample(x, np.asarray(s, dtype=float))


def sample_atoms(window: BurnWindow, jets: Trajectory, seed: int) -> AtomSample:
    """Atoms on the dilated window with ignition times up to ``window.t_max``."""
    if window.t_max >= blowup_time(window.d):
        raise BeyondBlowup("t_max must be below the blow-up time")
    if jets.d != window.d:
        raise ValueError("trajectory and window dimensions differ")
    return _draw(np.random.default_rng(seed), window, _TimeSampler(jets, window.t_max))


def first_time(z, atoms, d: Optional[int] = None) -> tuple[float, int]:
    """(min over atoms of s + 2||x - z||_1, index of the minimiser or -1)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    x, s = _as_arrays(atoms, len(z) if d is None else d)
    if len(s) == 0:
        return math.inf, -1
    ft = s + 2 * np.abs(x - z).sum(axis=1)
    k = int(np.argmin(ft))
    return float(ft[k]), k


def is_burned(z, t: float, atoms) -> bool:
    return first_time(z, atoms)[0] <= t


def is_burned_bruteforce(z, t: float, atoms: Iterable[PoissonAtom]) -> bool:
    """Reference implementation: look for one atom whose ball covers z."""
    for a in atoms:
        if a.s <= t and sum(abs(xi - zi) for xi, zi in zip(a.x, np.atleast_1d(z))) <= (t - a.s) / 2:
            return True
    return False


def _x_at(t: float, jets: Trajectory) -> float:
    _check_cover(jets, t)
    hit = np.nonzero(jets.t == t)[0]
    if len(hit):
        return float(jets.x[hit[0]])
    return float(CubicHermiteSpline(jets.t, jets.x, jets.y)(t))


def time_for_unburned(d: int, p: float) -> float:
    """The time t at which exp(-x(t)) = p."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    T = blowup_time(d)
    target = math.log(1 / p)
    jets = burn_trajectory(d, T * (1 - 1e-6))
    if jets.x[-1] < target:
        raise TrajectoryTooShort(f"x stays below ln(1/p) = {target!r}")
    x = CubicHermiteSpline(jets.t, jets.x, jets.y)
    return float(brentq(lambda t: x(t) - target, 0.0, jets.t[-1], xtol=1e-15, rtol=1e-15))


def unburned_probability_analytic(t: float, jets: Trajectory) -> float:
    """exp(-x(t)) = 1/y^(d)(t) from the integrated state."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return math.exp(-_x_at(t, jets)) if t > 0 else 1.0


def convolution_exponent(t: float, jets: Trajectory) -> float:
    """int_0^t (t-s)^d/d! y^(d)(s) ds by exact Gauss-Legendre on Hermite panels.

    On each step y^(d) is the cubic Hermite interpolant of its values and
    derivatives (y^(d+1) = y y^(d)), so the integrand is a polynomial of
    degree d+3 per panel and the panel rule is exact for it.
    """
    _check_cover(jets, t)
    d = jets.d
    ts = jets.t[jets.t < t]
    ts = np.append(ts, t)
    H = CubicHermiteSpline(jets.t, jets.jets[:, d], jets.y * jets.jets[:, d])
    nodes, weights = np.polynomial.legendre.leggauss(d // 2 + 3)
    a, b = ts[:-1, None], ts[1:, None]
    s = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    vals = (t - s) ** d / math.factorial(d) * H(s)
    return float(np.sum(0.5 * (b - a) * weights * vals))


def unburned_probability_convolution(t: float, jets: Trajectory) -> float:
    return math.exp(-convolution_exponent(t, jets)) if t > 0 else 1.0


@dataclass
class MCResult:
    estimate: float
    stderr: float
    trials: int
    unburned: int


def mc_unburned_fraction(window: BurnWindow, t: float, trials: int, seed: int,
                         jets: Optional[Trajectory] = None) -> MCResult:
    """Frequency with which the probe z = 0 is unburned at ``t``.

    Trial i draws its atoms from the stream SeedSequence([seed, i]), so any
    partition of the trials yields the same counts.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if window.dilation < t / 2:
        raise DilationTooSmall(f"dilation {window.dilation!r} < t/2 = {t / 2!r}")
    if t == 0:
        return MCResult(1.0, 0.0, trials, trials)
    jets = jets if jets is not None else burn_trajectory(window.d, t, marks=(t,))
    w = BurnWindow(window.d, window.R, t, window.dilation)
    sampler = _TimeSampler(jets, t)
    unburned = sum(not _trial_burned(seed, i, w, sampler, t) for i in range(trials))
    p = unburned / trials
    return MCResult(p, math.sqrt(max(p * (1 - p), 0.0) / trials), trials, unburned)


def _trial_burned(seed: int, i: int, window: BurnWindow, sampler: _TimeSampler,
                  t: float) -> bool:
    rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
    atoms = _draw(rng, window, sampler)
    return bool(len(atoms.s)) and bool(np.any(atoms.s + 2 * np.abs(atoms.x).sum(axis=1) <= t))


def atom_color(k: int) -> tuple[int, int, int]:
    """Stable pseudo-random colour for atom ``k`` (kept away from black)."""
    h = hashlib.blake2b(k.to_bytes(8, "little"), digest_size=3).digest()
    return tuple(64 + v * 191 // 255 for v in h)


UNBURNED_COLOR = (0, 0, 0)


@dataclass
class BurnRaster:
    d: int
    resolution: int
    first_time: np.ndarray  # d=1: (resolution,) per column; d=2: (res, res)
    first_burner: np.ndarray  # atom index, -1 if no atom
    times: np.ndarray  # row times (d=1) or the snapshot time (d=2, length 1)

    @property
    def burned(self) -> np.ndarray:
        """Boolean image: d=1 (rows, cols) space-time; d=2 (res, res) snapshot."""
        if self.d == 1:
            return self.first_time[None, :] <= self.times[:, None]
        return self.first_time <= self.times[0]

    @property
    def labels(self) -> np.ndarray:
        """Atom index per pixel, -1 where unburned."""
        if self.d == 1:
            lab = np.broadcast_to(self.first_burner, self.burned.shape)
        else:
            lab = self.first_burner
        return np.where(self.burned, lab, -1)

    def burned_fraction(self) -> np.ndarray:
        b = self.burned
        return b.mean(axis=1) if self.d == 1 else np.array([b.mean()])

    def to_ppm(self, path) -> None:
        lab = self.labels
        h, w = lab.shape
        img = np.zeros((h, w, 3), dtype=np.uint8)
        for k in np.unique(lab):
            img[lab == k] = UNBURNED_COLOR if k < 0 else atom_color(int(k))
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(img.tobytes())

    def legend_to_csv(self, path, atoms: AtomSample) -> None:
        used = sorted(int(k) for k in np.unique(self.labels) if k >= 0)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["index", "r", "g", "b", "s"] + [f"x{i}" for i in range(1, self.d + 1)])
            for k in used:
                out.writerow([k, *atom_color(k), fmt(atoms.s[k])] + [fmt(v) for v in atoms.x[k]])


def pixel_centres(window: BurnWindow, resolution: int) -> np.ndarray:
    return -window.R + (np.arange(resolution) + 0.5) * 2 * window.R / resolution


def render_field(window: BurnWindow, atoms, resolution: int,
                 rows: Optional[int] = None, t: Optional[float] = None) -> BurnRaster:
    """First-burn times on the pixel grid.

    For d=1 the image is space (columns) against time (rows; row r shows
    t = (r + 0.5) t_max / rows). For d=2 it is a snapshot at ``t``
    (default t_max); row r, column c is the point (z_c, z_r).
    """
    if window.d not in (1, 2):
        raise ValueError("rendering supports d = 1 and d = 2 only")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    x, s = _as_arrays(atoms, window.d)
    zc = pixel_centres(window, resolution)
    if window.d == 1:
        pts = zc[:, None]
        rows = resolution if rows is None else rows
        times = (np.arange(rows) + 0.5) * window.t_max / rows
    else:
        g1, g2 = np.meshgrid(zc, zc)  # g1 varies along columns
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        times = np.array([window.t_max if t is None else t])
    ft = np.full(len(pts), math.inf)
    who = np.full(len(pts), -1, dtype=np.int64)
    for k in range(len(s)):  # atoms sequentially keeps memory at O(pixels)
        cand = s[k] + 2 * np.abs(pts - x[k]).sum(axis=1)
        better = cand < ft
        ft[better] = cand[better]
        who[better] = k
    if window.d == 2:
        ft = ft.reshape(resolution, resolution)
        who = who.reshape(resolution, resolution)
    return BurnRaster(window.d, resolution, ft, who, times)


@dataclass
class CoverageRow:
    eps: float
    analytic_exponent: float
    mc_estimate: float  # exponent from MC; nan when trials are insufficient
    stderr: float


def coverage_rate_check(window: BurnWindow, eps_list: Sequence[float], trials: int,
                        seed: int = 0) -> list[CoverageRow]:
    """Exponent ln P(unburned at T - eps) / ln eps, analytically and by MC.

    The MC column is reported only when the expected number of unburned
    probes trials * p reaches MIN_EXPECTED_HITS; its standard error is
    propagated through the logarithm.
    """
    d = window.d
    T = blowup_time(d)
    eps_sorted = sorted(eps_list, reverse=True)
    if min(eps_sorted) <= 0:
        raise ValueError("eps must be positive")
    times = [T - e for e in eps_sorted]
    if times[-1] <= 0:
        raise ValueError("eps exceeds T")
    try:
        jets = burn_trajectory(d, times[-1], marks=times)
    except BeyondBlowup as exc:
        raise TrajectoryTooShort(f"eps too small for the trajectory: {exc}") from exc
    rows = []
    for e, t in zip(eps_sorted, times):
        x = _x_at(t, jets)
        lnv = math.log(1 / e)
        analytic = x / lnv
        mc, se = math.nan, math.nan
        if trials * math.exp(-x) >= MIN_EXPECTED_HITS:
            w = BurnWindow(d, window.R, t, max(window.dilation, t / 2))
            r = mc_unburned_fraction(w, t, trials, seed, jets)
            if r.unburned > 0:
                mc = -math.log(r.estimate) / lnv
                se = r.stderr / (r.estimate * lnv)
        rows.append(CoverageRow(e, analytic, mc, se))
    return rows


def coverage_to_csv(rows: Sequence[CoverageRow], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["eps", "analytic_exponent", "mc_estimate", "stderr"])
        for r in rows:
            out.writerow([fmt(r.eps), fmt(r.analytic_exponent), fmt(r.mc_estimate), fmt(r.stderr)])
