"""Acceptance gate: one test per criterion, one PASS/FAIL line per criterion.

Tolerances live in blowup_lab.acceptance and are the contract values:
1e-6 (d=1 blow-up time, < 5 s), 1e-4 (cross-method, < 30 s), [0.95, 1.05]
(jet rates), 5% (log growth of x), exact integers (< 1 s), 1e-8 (feasibility,
< 2 min), 1e-6 (LV convergence), 5e-3 (time averages), 1e-3 per 100-time
window (d=11 oscillation), 3 binomial standard errors and 1e-8 relative
(burning), 10% (coverage exponent) and a 2x refinement gain (residuals).

Run directly (``python tests/test_acceptance.py``) to print the lines only.
"""
import pytest

from blowup_lab.acceptance import CRITERIA, run_criterion

RESULTS = []


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA],
                         ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number):
    res = run_criterion(number)
    RESULTS.append(res)
    print(res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    for n, _, _ in CRITERIA:
        print(run_criterion(n).line(), flush=True)
