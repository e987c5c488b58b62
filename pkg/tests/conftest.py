import sys

import numpy as np
import pytest

from billiardlab.curve import CurveSpec, build_curve, circle_spec


@pytest.fixture(scope="session")
def circles():
    """Geodesic circles keyed by (K, r)."""
    return {(K, r): build_curve(circle_spec(K, r)) for K in (1, -1, 0) for r in (0.3, 0.7, 1.2)}


@pytest.fixture(scope="session")
def perturbed():
    """One smooth convex non-circular curve per surface, off-center."""
    out = {}
    for K, center in ((1, [0.1, -0.05, np.sqrt(1 - 0.0125)]), (-1, None), (0, [0.2, 0.1, 0.0])):
        spec = CurveSpec(K, 0.8, ((2, 0.04, 0.01), (3, 0.01, -0.005)), center)
        out[K] = build_curve(spec)
    return out


@pytest.fixture(scope="session")
def ellipse_like():
    """Convex ellipse-like curve on the sphere that has conjugate points."""
    return build_curve(CurveSpec(1, 0.8, ((2, 0.10, 0.0),)))



def pytest_terminal_summary(terminalreporter):
    """Echo one line per acceptance check after the run."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        checks = results[n]
        ok = all(c.passed for c in checks if c.gating)
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}")
        for c in checks:
            terminalreporter.write_line("    " + c.line())
