"""Positive-definiteness of M(lambda) = DA + (DA)^T and the search for lambda.

M is linear in lambda:

    M[0,0] = 4 l1,  M[0,1] = l2 - l1,  M[0,j] = l_j (j >= 2)
    M[i,i] = 2 l_i, M[i,i+1] = -l_i   (i >= 1)

so the smallest eigenvalue is a concave function of lambda and can be
maximised over the simplex by projected supergradient ascent.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

REFERENCE_LAMBDA = (1024, 227, 118, 92, 89, 97, 116, 153, 232, 481)
REFERENCE_MINORS = (
    4096,
    1224375,
    114265104,
    6270814340,
    280372975336,
    12330415584972,
    687248010753336,
    69483419810465760,
    12807765625815100744,
    136953089422286895648,
)

FEASIBLE_THRESHOLD = 1e-8
LAMBDA_FLOOR = 1e-6
RATIONAL_DENOMINATOR = 10**6
INDETERMINATE_BAND = 1e-10


def build_matrix(lam: Sequence) -> list | np.ndarray:
    """M(lambda); exact (nested lists) for int/Fraction input, float array otherwise."""
    exact = all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in lam)
    d = len(lam)
    if d < 1:
        raise ValueError("lambda must be non-empty")
    zero = Fraction(0) if exact else 0.0
    M = [[zero] * d for _ in range(d)]
    M[0][0] = 4 * lam[0]
    for j in range(1, d):
        M[0][j] = M[j][0] = (lam[1] - lam[0]) if j == 1 else lam[j]
    for i in range(1, d):
        M[i][i] = 2 * lam[i]
        if i + 1 < d:
            M[i][i + 1] = M[i + 1][i] = -lam[i]
    if exact:
        return [[Fraction(v) for v in row] for row in M]
    return np.array(M, dtype=float)


def _basis_matrices(d: int) -> np.ndarray:
    """dM/dlambda_k, stacked along axis 0."""
    return np.array([build_matrix(np.eye(d)[k]) for k in range(d)])


def bareiss_minors(M) -> list:
    """All leading principal minors by fraction-free elimination.

    With integer entries every intermediate quantity is an integer (Bareiss),
    and the k-th pivot is the k-th leading minor. Rational entries are
    scaled to a common denominator first. A zero pivot stops the elimination;
    the remaining minors are then computed directly.
    """
    n = len(M)
    den = 1
    for row in M:
        for v in row:
            den = den * Fraction(v).denominator // math.gcd(den, Fraction(v).denominator)
    a = [[int(Fraction(v) * den) for v in row] for row in M]
    minors = []
    prev = 1
    for k in range(n):
        piv = a[k][k]
        minors.append(Fraction(piv, den ** (k + 1)))
        if piv == 0:
            minors.extend(_det_exact([r[:m] for r in M[:m]]) for m in range(k + 2, n + 1))
            break
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * piv - a[i][k] * a[k][j]) // prev
        prev = piv
    return [int(m) if m.denominator == 1 else m for m in minors]


def _det_exact(M) -> Fraction:
    a = [[Fraction(v) for v in row] for row in M]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            fac = a[r][c] / a[c][c]
            for j in range(c, n):
                a[r][j] -= fac * a[c][j]
    return det


def leading_minors_exact(lam: Sequence[int]) -> list:
    """Delta_1..Delta_d of M(lambda) for integer (or rational) lambda."""
    if any(Fraction(v) <= 0 for v in lam):
        raise ValueError("lambda must be componentwise positive")
    return bareiss_minors(build_matrix([Fraction(v) if not isinstance(v, int) else v
                                        for v in lam]))


def is_positive_definite(M, mode: str = "exact"):
    """Sylvester test in rationals (``exact``) or LDL^T pivots (``float``).

    Float mode returns ``"indeterminate"`` when a pivot falls within
    1e-10 * ||M|| of zero, and otherwise a bool.
    """
    if mode == "exact":
        if isinstance(M, np.ndarray):
            M = [[Fraction(float(v)) for v in row] for row in M]
        return all(m > 0 for m in bareiss_minors(M))
    if mode != "float":
        raise ValueError(f"unknown mode {mode!r}")
    A = np.array([[float(v) for v in row] for row in M])
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(np.abs(A).max(), 1.0)):
        raise ValueError("matrix is not symmetric")
    band = INDETERMINATE_BAND * np.linalg.norm(A, 2)
    n = len(A)
    L = np.eye(n)
    D = np.zeros(n)
    for j in range(n):
        D[j] = A[j, j] - np.dot(L[j, :j] ** 2, D[:j])
        if abs(D[j]) <= band:
            return "indeterminate"
        if D[j] < 0:
            return False
        for i in range(j + 1, n):
            L[i, j] = (A[i, j] - np.dot(L[i, :j] * L[j, :j], D[:j])) / D[j]
    return True


def min_eig_normalized(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    return float(np.linalg.eigvalsh(build_matrix(lam / lam.sum()))[0])


def project_simplex(v: np.ndarray, floor: float = LAMBDA_FLOOR) -> np.ndarray:
    """Euclidean projection onto {sum = 1, x >= floor} by sorting."""
    d = len(v)
    if floor * d >= 1:
        raise ValueError("floor too large for the dimension")
    # shift so the constraint becomes the standard simplex of mass 1 - d*floor
    z = v - floor
    mass = 1.0 - d * floor
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - mass
    rho = np.nonzero(u - css / np.arange(1, d + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(z - theta, 0.0) + floor


def _supergradient(lam: np.ndarray, basis: np.ndarray, tie_tol: float = 1e-9):
    evals, evecs = np.linalg.eigh(np.tensordot(lam, basis, axes=1))
    # eigenspace of the smallest eigenvalue; average the rank-one gradients
    tied = evals <= evals[0] + tie_tol * max(1.0, abs(evals[0]))
    V = evecs[:, tied]
    g = np.einsum("ia,kij,ja->k", V, basis, V) / V.shape[1]
    return evals[0], g


@dataclass
class LyapunovCandidate:
    d: int
    lam: tuple  # integers: lambda rationalised with denominator 1e6, times 1e6
    minors: tuple  # exact Delta_k of M(lam)
    min_eig: float  # of M(lam / sum lam)
    feasible: bool

    @property
    def exact_pd(self) -> bool:
        return all(m > 0 for m in self.minors)

    def report(self) -> str:
        lines = [f"d: {self.d}",
                 "lambda: " + " ".join(str(v) for v in self.lam),
                 "minors: " + " ".join(str(m) for m in self.minors),
                 f"min_eig: {self.min_eig:.17g}",
                 f"feasible: {str(self.feasible).lower()}"]
        return "\n".join(lines) + "\n"


def _ascent(d: int, iters: int, seed: int, restart: int) -> tuple[float, np.ndarray, list]:
    """One restart; returns (best value, best lambda, running best per iteration)."""
    basis = _basis_matrices(d)
    rng = np.random.default_rng([seed, restart])
    lam = project_simplex(rng.dirichlet(np.ones(d)))
    best_val, best_lam = -math.inf, lam
    history = []
    for k in range(iters):
        val, g = _supergradient(lam, basis)
        if val > best_val:
            best_val, best_lam = val, lam.copy()
        history.append(best_val)
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        # diminishing, non-summable steps
        lam = project_simplex(lam + (0.5 / d) / math.sqrt(k + 1) * g / gn)
    return best_val, best_lam, history


def _ascent_job(args):
    return _ascent(*args)


def search_lambda(d: int, restarts: int = 8, iters: int = 2000, seed: int = 0,
                  workers: int = 1) -> LyapunovCandidate:
    """Maximise lambda_min(M(lambda)) over the simplex by projected supergradient.

    Restarts use independent streams derived from ``(seed, restart)`` and the
    best one wins, so the result does not depend on ``workers``. The winner
    is rationalised (denominator <= 1e6) and its minors computed exactly.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    jobs = [(d, iters, seed, r) for r in range(restarts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_ascent_job, jobs))
    else:
        results = [_ascent_job(j) for j in jobs]
    best_val, best_lam, _ = max(results, key=lambda r: r[0])
    # rational lambda with denominator 1e6; feasibility is scale invariant, so keep
    # the integer numerators and get integer minors
    lam_int = tuple(max(1, int(round(v * RATIONAL_DENOMINATOR))) for v in best_lam)
    minors = tuple(bareiss_minors(build_matrix(list(lam_int))))
    val = min_eig_normalized(lam_int)
    return LyapunovCandidate(d, lam_int, minors, val, val > FEASIBLE_THRESHOLD)


def ascent_history(d: int, iters: int, seed: int = 0, restart: int = 0) -> list:
    """Running best objective of a single restart, for monitoring."""
    return _ascent(d, iters, seed, restart)[2]
