"""Acceptance criteria 1-13 at their stated scale and tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary. Run standalone with ``python tests/test_acceptance.py``.
"""

import sys
import time

import pytest

from runtumble.suite import CRITERIA

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = {}

TITLES = {
    1: "steady state stays exactly zero",
    2: "microscopic coercivity identity",
    3: "Pi T Pi = 0 and Pi^2 = Pi",
    4: "A-operator bounds and zeta-route order",
    5: "Poincare inequality and optimality witness",
    6: "interpolation inequalities",
    7: "third conservation law",
    8: "dissipation identity refinement",
    9: "nonlinear decay",
    10: "linearized alpha-entropy decay",
    11: "oracle equivalence",
    12: "constant table",
    13: "H1 watchdog abort",
}


def evaluate(k: int):
    t0 = time.perf_counter()
    results = CRITERIA[k]()
    elapsed = time.perf_counter() - t0
    ok = bool(results) and all(r.passed for r in results)
    failed = [f"{r.name} (measured {r.measured:.6g}, tolerance {r.tolerance:.6g})" for r in results if not r.passed]
    line = f"criterion {k:2d} {'PASS' if ok else 'FAIL'}: {TITLES[k]} [{elapsed:.1f}s]"
    if failed:
        line += " -- failing: " + "; ".join(failed)
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok, results


@pytest.mark.parametrize("k", sorted(CRITERIA), ids=lambda k: f"criterion_{k:02d}")
def test_criterion(k):
    ok, results = evaluate(k)
    detail = "\n".join(f"  {'ok  ' if r.passed else 'FAIL'} {r.name}: measured={r.measured!r} "
                       f"tolerance={r.tolerance!r} {r.details}" for r in results)
    assert ok, detail


if __name__ == "__main__":
    outcomes = [evaluate(k)[0] for k in sorted(CRITERIA)]
    sys.exit(0 if all(outcomes) else 1)
