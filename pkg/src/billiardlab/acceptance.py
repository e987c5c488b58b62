"""Acceptance checks, shared by the test suite and ``billiardlab selftest``.

Each ``criterion_*`` function returns a list of :class:`Check` records. A check
with ``gating=False`` is reported for information only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .billiard import PhasePoint, chord, chord_length, map_differential, orbit_batch, step_arrays
from .curve import CurveError, CurveSpec, build_curve, circle_spec, gauss_bonnet_residual, random_fourier_spec
from .integralgeom import (
    inner_integral,
    inner_integrand,
    isoperimetric_deficit,
    phase_average_length,
    rigidity_integral,
)
from .mirror import (
    coth_mean_gap,
    cot_mean_gap,
    mirror_residual,
    solve_caustic_distance,
    wronskian_identities_residual,
)
from .variational import (
    Definiteness,
    conjugate_point_test,
    hopf_cocycle,
    jacobi_coefficients,
    monotone_slope,
    push_slope,
    second_variation_definiteness,
)

TWO_PI = 2 * np.pi
RADII = (0.3, 0.7, 1.2)
SURFACES = (1, -1)
ALL_SURFACES = (1, -1, 0)
ELLIPSE_SPEC = CurveSpec(1, 0.8, ((2, 0.15, 0.0),))
ELLIPSE_SUBSTITUTE = CurveSpec(1, 0.8, ((2, 0.10, 0.0),))
ELLIPSE_PLANAR = CurveSpec(0, 0.8, ((2, 0.15, 0.0),))
ROUNDOFF_FLOOR = 1e-12


@dataclass
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    gating: bool = True

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if not self.gating:
            tag = "info:" + tag
        return f"[{tag}] {self.criterion:>2}. {self.name}: {self.detail} ({self.seconds:.2f} s)"


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# registry of curves touched by the audits, for the structural checks
_audited: list = []


def _audit(curve):
    _audited.append(curve)
    return curve


def random_convex_curves(K: int, count: int, seed: int):
    """``count`` valid random Fourier perturbations (min k > 1 for K = -1)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        spec = random_fourier_spec(rng, K, amplitude=rng.uniform(0.02, 0.08))
        try:
            c = build_curve(spec)
        except CurveError:
            continue
        if K == -1 and c.min_curvature <= 1:
            continue
        out.append(c)
    return out


def criterion_1():
    worst = 0.0
    with _Timer() as t:
        for K in SURFACES:
            for r in RADII:
                c = _audit(build_curve(circle_spec(K, r)))
                worst = max(worst, abs(rigidity_integral(c) - TWO_PI))
    ok = worst <= 1e-8
    return [
        Check(1, "circle equality |I - 2pi| <= 1e-8", ok, f"max |I - 2pi| = {worst:.2e}", t.seconds),
        Check(1, "runtime < 1 s", t.seconds < 1.0, f"{t.seconds:.3f} s", t.seconds),
    ]


def criterion_2():
    checks = []
    with _Timer() as t:
        for K, seed in ((1, 2024), (-1, 2025)):
            curves = random_convex_curves(K, 50, seed)
            gaps = np.array([rigidity_integral(_audit(c)) - TWO_PI for c in curves])
            if K == 1:
                ok = bool(np.all(gaps > 0))
                detail = f"50 curves, min gap I - 2pi = {gaps.min():.3e}"
            else:
                ok = bool(np.all(gaps < 0))
                detail = f"50 curves (min k > 1), min gap 2pi - I = {(-gaps).min():.3e}"
            checks.append(Check(2, f"strictness K={K:+d}", ok, detail))
    checks.append(Check(2, "runtime < 10 s", t.seconds < 10.0, f"{t.seconds:.2f} s", t.seconds))
    return checks


def _santalo_curves():
    out = []
    for K in ALL_SURFACES:
        for r in RADII:
            out.append((f"K={K:+d} circle r={r}", build_curve(circle_spec(K, r))))
        for i, c in enumerate(random_convex_curves(K, 5, 300 + K)):
            out.append((f"K={K:+d} perturbed #{i}", c))
    return out


def _decreases(r_coarse, r_fine):
    return abs(r_fine) < abs(r_coarse) or abs(r_fine) <= ROUNDOFF_FLOOR


def criterion_3():
    checks = []
    # closed-form cap area; the quoted 9.2838 is a rounding of 9.28366, so it is
    # compared at the criterion tolerance and the closed form at machine precision
    ref = 4 * np.pi**2 * (1 - np.cos(0.7))
    c07 = build_curve(circle_spec(1, 0.7))
    ratio = phase_average_length(c07, (256, 64)) / (TWO_PI * c07.A)
    ok = abs(TWO_PI * c07.A - ref) <= 1e-12 * ref and abs(ref / 9.2838 - 1) <= 1e-3 and abs(ratio - 1) <= 1e-3
    checks.append(
        Check(3, "K=+1 r=0.7: 2piA = 4pi^2(1 - cos 0.7) ~ 9.2838, quadrature / 2piA = 1", ok,
              f"2piA = {TWO_PI * c07.A:.10f}, closed form {ref:.10f}, ratio - 1 = {ratio - 1:.2e}")
    )
    worst_rel = 0.0
    worst_time = 0.0
    not_decreasing = []
    for name, c in _santalo_curves():
        _audit(c)
        with _Timer() as t:
            target = TWO_PI * c.A
            rel = (phase_average_length(c, (256, 64)) - target) / target
            rel2 = (phase_average_length(c, (512, 128)) - target) / target
        worst_time = max(worst_time, t.seconds)
        worst_rel = max(worst_rel, abs(rel))
        coarse = (phase_average_length(c, (16, 16)) - target) / target
        coarse2 = (phase_average_length(c, (32, 32)) - target) / target
        if not (_decreases(rel, rel2) and _decreases(coarse, coarse2)):
            not_decreasing.append(name)
    checks.append(Check(3, "Santalo relative residual <= 1e-3 on (256, 64)", worst_rel <= 1e-3, f"max = {worst_rel:.2e}"))
    checks.append(
        Check(3, "residual decreases under grid doubling", not not_decreasing,
              "all curves" if not not_decreasing else f"failed: {not_decreasing}")
    )
    checks.append(Check(3, "runtime < 60 s per curve", worst_time < 60, f"slowest {worst_time:.2f} s", worst_time))
    return checks


def _fd_second_derivatives(c, x, y, h=1e-4):
    def L(a, b):
        return chord_length(c, a, b)

    f11 = (L(x + h, y) - 2 * L(x, y) + L(x - h, y)) / h**2
    f22 = (L(x, y + h) - 2 * L(x, y) + L(x, y - h)) / h**2
    f12 = (L(x + h, y + h) - L(x + h, y - h) - L(x - h, y + h) + L(x - h, y - h)) / (4 * h * h)
    return f11, f12, f22


def random_chords(c, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, c.P, n)
    Phi = rng.uniform(-0.9, 0.9, n)
    _, _, inc, _ = step_arrays(c, x, Phi)
    return x, x + inc


def criterion_4():
    checks = []
    with _Timer() as t:
        for K in ALL_SURFACES:
            c = build_curve(CurveSpec(K, 0.8, ((2, 0.04, 0.01), (3, 0.01, -0.005))))
            x, y = random_chords(c, 100, 40 + K)
            ch = chord(c, x, y)
            f11, f12, f22 = _fd_second_derivatives(c, x, y)
            rel = max(
                np.max(np.abs(f11 - ch.L11) / np.abs(ch.L11)),
                np.max(np.abs(f12 - ch.L12) / np.abs(ch.L12)),
                np.max(np.abs(f22 - ch.L22) / np.abs(ch.L22)),
            )
            ok = rel <= 1e-5 and bool(np.all(ch.L12 > 0))
            checks.append(Check(4, f"L11, L12, L22 vs finite differences K={K:+d}", ok,
                                f"max relative error {rel:.2e}, min L12 = {ch.L12.min():.3e}"))
    checks.append(Check(4, "runtime < 5 s", t.seconds < 5.0, f"{t.seconds:.2f} s", t.seconds))
    return checks


def criterion_5():
    worst = 0.0
    with _Timer() as t:
        for K, ks in ((-1, (1.1, 2.0, 5.0)), (1, (0.5, 1.0, 2.0))):
            for k in ks:
                q, _ = quad(inner_integrand, 0, np.pi / 2, args=(k, K), epsabs=1e-13, epsrel=1e-13, limit=200)
                worst = max(worst, abs(q - inner_integral(k, K)))
    spots = abs(inner_integral(2.0, -1) - 0.42089) < 5e-6 and abs(inner_integral(1.0, 1) - 0.65065) < 5e-6
    return [
        Check(5, "closed-form inner integrals vs adaptive quadrature <= 1e-9", worst <= 1e-9, f"max diff {worst:.2e}"),
        Check(5, "spot values 0.42089, 0.65065", spots,
              f"{inner_integral(2.0, -1):.6f}, {inner_integral(1.0, 1):.6f}"),
        Check(5, "runtime < 1 s", t.seconds < 1.0, f"{t.seconds:.3f} s", t.seconds),
    ]


def criterion_6():
    worst = 0.0
    angles = np.linspace(0.2, np.pi - 0.2, 10)
    with _Timer() as t:
        for K in ALL_SURFACES:
            c = build_curve(circle_spec(K, 0.7))
            configs = orbit_batch(c, np.linspace(0, c.P, 10, endpoint=False), np.cos(angles), 100)
            for o in configs:
                worst = max(worst, float(np.max(np.abs(mirror_residual(c, o, np.ones(o.n))))))
    return [
        Check(6, "mirror residual on circles <= 1e-10", worst <= 1e-10, f"max {worst:.2e} over 3 x 10 x 100 bounces"),
        Check(6, "runtime < 2 s", t.seconds < 2.0, f"{t.seconds:.2f} s", t.seconds),
    ]


def criterion_7():
    rng = np.random.default_rng(7)
    worst_rel = 0.0
    max_it = 0
    min_cert = np.inf
    with _Timer() as t:
        for _ in range(1000):
            K = int(rng.choice([1, -1, 0]))
            L = rng.uniform(0.05, 3.0)
            phi0, phi1 = rng.uniform(0.05, np.pi - 0.05, 2)
            nu1 = rng.uniform(0.2, 5.0)
            d = solve_caustic_distance(L, phi0, phi1, nu1, K)
            worst_rel = max(worst_rel, abs(d.ratio_residual) / d.target)
            max_it = max(max_it, d.iterations)
            min_cert = min(min_cert, d.min_certificate)
    ok = worst_rel <= 1e-12 and max_it <= 60 and min_cert > 0
    return [
        Check(7, "caustic bisection: <= 60 iterations, ratio residual <= 1e-12", ok,
              f"max rel residual {worst_rel:.2e}, max iterations {max_it}, min certificate {min_cert:.3e}"),
        Check(7, "runtime < 2 s", t.seconds < 2.0, f"{t.seconds:.2f} s", t.seconds),
    ]


def _window_verdicts(config, windows):
    out = []
    for i, j in windows:
        seg = jacobi_coefficients(config, i, j)
        conj = conjugate_point_test(seg).conjugate
        definite = None
        if seg.n_interior >= 1:
            definite = second_variation_definiteness(seg) == Definiteness.NEGATIVE_DEFINITE
        out.append((conj, definite))
    return out


def _scan(curve, n_orbits, bounces, seed):
    rng = np.random.default_rng(seed)
    configs = orbit_batch(curve, rng.uniform(0, curve.P, n_orbits), rng.uniform(-0.95, 0.95, n_orbits), bounces)
    results = []
    for o in configs:
        windows = [(0, bounces)] + [tuple(sorted(rng.choice(bounces + 1, 2, replace=False))) for _ in range(3)]
        results.extend(_window_verdicts(o, windows))
    return results


def criterion_8():
    checks = []
    rng = np.random.default_rng(8)
    equivalence = []
    with _Timer() as t:
        n_conj = 0
        n_def = 0
        n_win = 0
        per_circle = 500 // 9 + 1
        for K in ALL_SURFACES:
            for r in RADII:
                c = build_curve(circle_spec(K, r))
                configs = orbit_batch(c, rng.uniform(0, c.P, per_circle), rng.uniform(-0.95, 0.95, per_circle), 50)
                for o in configs:
                    if n_win >= 500:
                        break
                    length = int(rng.integers(3, 51))
                    start = int(rng.integers(0, 51 - length))
                    (conj, definite), = _window_verdicts(o, [(start, start + length)])
                    n_win += 1
                    n_conj += conj
                    n_def += bool(definite)
                    equivalence.append((conj, definite))
        checks.append(Check(8, "circles: no conjugate points in 500 windows", n_conj == 0,
                            f"{n_conj} conjugate verdicts in {n_win} windows"))
        checks.append(Check(8, "circles: second variation negative definite", n_def == n_win,
                            f"{n_def}/{n_win} negative definite"))

        try:
            ellipse = build_curve(ELLIPSE_SPEC)
        except CurveError as exc:
            checks.append(Check(8, "ellipse-like rho = 0.8 + 0.15 cos 2theta (K=+1): conjugate pair found", False,
                                f"curve cannot be built: {exc}"))
        else:
            res = _scan(ellipse, 200, 50, 88)
            equivalence.extend(res)
            found = sum(c for c, _ in res)
            checks.append(Check(8, "ellipse-like rho = 0.8 + 0.15 cos 2theta (K=+1): conjugate pair found", found > 0,
                                f"{found} conjugate windows"))

        substitute = build_curve(ELLIPSE_SUBSTITUTE)
        res = _scan(substitute, 200, 50, 89)
        found = sum(c for c, _ in res)
        checks.append(Check(8, "convex substitute rho = 0.8 + 0.10 cos 2theta (K=+1): conjugate pair found", found > 0,
                            f"{found} conjugate windows of {len(res)}", gating=False))
        equivalence.extend(res)

        res = _scan(build_curve(ELLIPSE_PLANAR), 200, 50, 90)
        found = sum(c for c, _ in res)
        checks.append(Check(8, "same shape in the plane rho = 0.8 + 0.15 cos 2theta (K=0): conjugate pair found",
                            found > 0, f"{found} conjugate windows of {len(res)}", gating=False))
        equivalence.extend(res)

        mismatches = sum(1 for conj, definite in equivalence if definite is not None and (not conj) != definite)
        tested = sum(1 for _, definite in equivalence if definite is not None)
        checks.append(Check(8, "conjugate-free <=> negative definite on every window", mismatches == 0,
                            f"{mismatches} mismatches in {tested} windows"))
    checks.append(Check(8, "runtime < 120 s", t.seconds < 120, f"{t.seconds:.2f} s", t.seconds))
    return checks


def criterion_9():
    worst_nu = 0.0
    worst_slope = 0.0
    starts = np.array([[0.1, 0.5], [1.0, -0.3], [2.0, 0.0]])
    with _Timer() as t:
        for K in ALL_SURFACES:
            for r in RADII:
                c = build_curve(circle_spec(K, r))
                for o in orbit_batch(c, starts[:, 0], starts[:, 1], 65):
                    p, q = o.phase_point(0), o.phase_point(1)
                    est = hopf_cocycle(c, p, 64, config=o)
                    est_q = hopf_cocycle(c, q, 64, config=o.shift(1))
                    for e in (est, est_q):
                        worst_nu = max(worst_nu, abs(e.nu1 - 1.0) if e.converged else np.inf)
                    m_p = monotone_slope(c, p, est.nu1)
                    m_q = monotone_slope(c, q, est_q.nu1)
                    pushed = push_slope(map_differential(c, p, 1e-6), m_p)
                    worst_slope = max(worst_slope, abs(pushed - m_q))
    return [
        Check(9, "circles: nu_1 = 1 within 1e-8", worst_nu <= 1e-8, f"max |nu_1 - 1| = {worst_nu:.2e}"),
        Check(9, "monotone slope invariant under DT to 1e-4", worst_slope <= 1e-4, f"max slope defect {worst_slope:.2e}"),
        Check(9, "runtime < 10 s", t.seconds < 10.0, f"{t.seconds:.2f} s", t.seconds),
    ]


def criterion_10():
    checks = []
    with _Timer() as t:
        curves = list(_audited) or [build_curve(circle_spec(K, r)) for K in SURFACES for r in RADII]
        gb = max(abs(gauss_bonnet_residual(c)) for c in curves)
        iso = min(isoperimetric_deficit(c) for c in curves)
        checks.append(Check(10, "Gauss-Bonnet residual <= 1e-6", gb <= 1e-6, f"max {gb:.2e} over {len(curves)} curves"))
        checks.append(Check(10, "isoperimetric deficit >= -1e-9", iso >= -1e-9, f"min {iso:.2e}"))

        rng = np.random.default_rng(10)
        worst = 0.0
        for K in ALL_SURFACES:
            L = rng.uniform(1e-3, np.pi - 1e-3 if K == 1 else 3.0, 10_000 // 3 + 1)
            a = rng.uniform(0, 1, L.size) * L
            for Li, ai in zip(L, a):
                worst = max(worst, *map(abs, wronskian_identities_residual(Li, ai, K)))
        checks.append(Check(10, "Wronskian identities <= 1e-13", worst <= 1e-13, f"max {worst:.2e} on 10^4 inputs"))

        a = rng.uniform(1e-3, np.pi - 1e-3, 20_000)
        b = rng.uniform(1e-3, np.pi - 1e-3, 20_000)
        keep = (a + b) / 2 <= np.pi / 2
        a, b = a[keep][:10_000], b[keep][:10_000]
        gap = cot_mean_gap(a, b)
        scale = 1 + np.abs(1 / np.tan(a)) + np.abs(1 / np.tan(b))
        checks.append(Check(10, "cot-mean inequality on 10^4 inputs", bool(np.all(gap >= -1e-12 * scale)) and a.size == 10_000,
                            f"min gap {gap.min():.2e}"))
        a = rng.exponential(1.0, 10_000) + 1e-6
        b = rng.exponential(1.0, 10_000) + 1e-6
        gap = coth_mean_gap(a, b)
        scale = 1 + 1 / np.tanh(a) + 1 / np.tanh(b)
        coth_ok = bool(np.all(gap >= -1e-12 * scale)) and bool(np.all(1 / np.tanh(a) > 1))
        checks.append(Check(10, "coth-mean inequality and coth > 1 on 10^4 inputs", coth_ok, f"min gap {gap.min():.2e}"))
    checks.append(Check(10, "runtime < 5 s", t.seconds < 5.0, f"{t.seconds:.2f} s", t.seconds))
    return checks


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(selected=None, echo=print) -> list[Check]:
    _audited.clear()
    results = []
    for n, fn in CRITERIA.items():
        if selected and n not in selected:
            continue
        for check in fn():
            results.append(check)
            if echo:
                echo(check.line())
    return results
