import io

import numpy as np
import pytest
from scipy.stats import qmc

from billiardlab.billiard import (
    BilliardError,
    GrazingError,
    PhasePoint,
    billiard_step,
    chord,
    chord_length,
    map_differential,
    orbit,
    orbit_batch,
    step_arrays,
    write_orbit_csv,
)
from billiardlab.curve import CurveSpec, build_curve, circle_spec
from billiardlab.surface import jacobi


def half_angle(phi, r, K):
    """Half the central angle subtended by a circle chord at angle phi (right-triangle trigonometry)."""
    scale = {1: np.cos(r), -1: np.cosh(r), 0: 1.0}[K]
    return np.arctan2(np.sin(phi), scale * np.cos(phi))


@pytest.mark.parametrize("K", [1, -1, 0])
def test_symmetric_chord_is_a_diameter(circles, K):
    c = circles[(K, 0.7)]
    ch = chord(c, 0.3, 0.3 + c.P / 2)
    assert ch.L == pytest.approx(1.4, abs=1e-12)
    assert ch.phi == pytest.approx(np.pi / 2, abs=1e-9)
    assert ch.psi == pytest.approx(np.pi / 2, abs=1e-9)


@pytest.mark.parametrize("K", [1, -1, 0])
def test_circle_chord_symmetry_and_formula(circles, K):
    c = circles[(K, 0.7)]
    rng = np.random.default_rng(0)
    x = rng.uniform(0, c.P, 50)
    y = x + rng.uniform(0.05, 0.95, 50) * c.P
    ch = chord(c, x, y)
    assert np.max(np.abs(ch.L11 - ch.L22)) <= 1e-10
    Y, _ = jacobi(ch.L, K)
    assert np.max(np.abs(ch.L12 - np.sin(ch.phi) * np.sin(ch.psi) / Y)) <= 1e-12
    assert np.all(ch.L12 > 0)


@pytest.mark.parametrize("K", [1, -1, 0])
def test_first_derivatives_are_the_angles(perturbed, K):
    """Phi = -dL/dx and Psi = dL/dy (the generating-function convention)."""
    c = perturbed[K]
    rng = np.random.default_rng(1)
    x = rng.uniform(0, c.P, 40)
    y = x + rng.uniform(0.1, 0.9, 40) * c.P
    h = 1e-6
    ch = chord(c, x, y)
    dLdx = (chord_length(c, x + h, y) - chord_length(c, x - h, y)) / (2 * h)
    dLdy = (chord_length(c, x, y + h) - chord_length(c, x, y - h)) / (2 * h)
    assert np.max(np.abs(dLdx + ch.Phi)) <= 1e-8
    assert np.max(np.abs(dLdy - ch.Psi)) <= 1e-8


@pytest.mark.parametrize("K", [1, -1, 0])
def test_second_derivatives_vs_finite_differences(perturbed, K):
    c = perturbed[K]
    rng = np.random.default_rng(2)
    x = rng.uniform(0, c.P, 100)
    _, _, inc, _ = step_arrays(c, x, rng.uniform(-0.9, 0.9, 100))
    y = x + inc
    h = 1e-4
    L = lambda a, b: chord_length(c, a, b)  # noqa: E731
    ch = chord(c, x, y)
    f11 = (L(x + h, y) - 2 * L(x, y) + L(x - h, y)) / h**2
    f22 = (L(x, y + h) - 2 * L(x, y) + L(x, y - h)) / h**2
    f12 = (L(x + h, y + h) - L(x + h, y - h) - L(x - h, y + h) + L(x - h, y - h)) / (4 * h * h)
    for fd, exact in ((f11, ch.L11), (f12, ch.L12), (f22, ch.L22)):
        assert np.max(np.abs(fd - exact) / np.abs(exact)) <= 1e-5


@pytest.mark.parametrize("K", [1, -1, 0])
def test_circle_rotation(circles, K):
    for r in (0.3, 0.7, 1.2):
        c = circles[(K, r)]
        for Phi in (-0.7, 0.2, 0.9):
            o = orbit(c, PhasePoint(0.4, Phi), 20)
            assert np.max(np.abs(o.Phi - Phi)) <= 1e-12
            expected = c.P * half_angle(np.arccos(Phi), r, K) / np.pi
            assert np.max(np.abs(o.increments - expected)) <= 1e-10


@pytest.mark.parametrize("K", [1, -1, 0])
def test_diametral_orbit_has_period_two(circles, K):
    c = circles[(K, 0.7)]
    q = billiard_step(c, billiard_step(c, PhasePoint(1.0, 0.0)))
    assert abs(c.wrap(q.x - 1.0 + 0.5 * c.P) - 0.5 * c.P) <= 1e-10


def test_commensurate_orbits_close():
    # plane: phi = pi/3 turns by 2 pi/3, period 3
    c = build_curve(circle_spec(0, 0.9))
    o = orbit(c, PhasePoint(0.2, np.cos(np.pi / 3)), 6)
    assert o.x_unwrapped[3] - o.x_unwrapped[0] == pytest.approx(c.P, abs=1e-10)
    # hyperbolic: tan(alpha) = tan(phi) / cosh(r) gives alpha = pi/6 at cosh r = 3, period 6
    c = build_curve(circle_spec(-1, np.arccosh(3.0)))
    o = orbit(c, PhasePoint(0.2, np.cos(np.pi / 3)), 6)
    assert o.x_unwrapped[6] - o.x_unwrapped[0] == pytest.approx(c.P, abs=1e-10)
    assert np.all(np.diff(o.x_unwrapped[:6]) < c.P / 5)


def test_dense_grid_oracle():
    c = build_curve(CurveSpec(1, 0.8, ((2, 0.05, 0.0),)))
    rng = np.random.default_rng(3)
    for _ in range(6):
        x, Phi = rng.uniform(0, c.P), rng.uniform(-0.9, 0.9)
        y = x + np.linspace(0, c.P, 100_001)[1:-1]
        g = chord(c, np.full(y.size, x), y).Phi - Phi
        i = int(np.nonzero((g[:-1] > 0) & (g[1:] <= 0))[0][0])
        y_oracle = y[i] + g[i] * (y[i + 1] - y[i]) / (g[i] - g[i + 1])
        _, _, inc, _ = step_arrays(c, np.array([x]), np.array([Phi]))
        assert x + inc[0] == pytest.approx(y_oracle, abs=1e-8)
        assert np.all(np.diff(g) < 0)


@pytest.mark.parametrize("K", [1, -1, 0])
def test_solver_residual_and_variational_consistency(perturbed, K):
    c = perturbed[K]
    rng = np.random.default_rng(4)
    x0, Phi0 = rng.uniform(0, c.P, 30), rng.uniform(-0.95, 0.95, 30)
    y, Psi, inc, ch = step_arrays(c, x0, Phi0)
    assert np.max(np.abs(ch.Phi - Phi0)) <= 1e-12
    for o in orbit_batch(c, x0[:5], Phi0[:5], 100):
        assert np.max(np.abs(o.reflection_defect())) <= 1e-9
        assert np.max(np.abs(o.euler_lagrange_residual())) <= 1e-9
        assert np.all(o.chords.L12 > 0)


@pytest.mark.parametrize("K", [1, -1, 0])
def test_time_reversal(perturbed, K):
    c = perturbed[K]
    o = orbit(c, PhasePoint(0.7, 0.35), 30)
    back = orbit(c, PhasePoint(o.x[-1], -o.Phi[-1]), 30)
    assert np.max(np.abs(back.chords.L[::-1] - o.chords.L)) <= 1e-9
    assert np.max(np.abs(c.wrap(back.x[::-1] - o.x + 0.5) - 0.5)) <= 1e-9
    assert np.max(np.abs(back.Phi[::-1] + o.Phi)) <= 1e-9


def test_zero_bounce_orbit(perturbed):
    o = orbit(perturbed[1], PhasePoint(0.1, 0.2), 0)
    assert o.n == 0 and o.x.size == 1


def test_errors(circles):
    c = circles[(1, 0.7)]
    with pytest.raises(GrazingError):
        billiard_step(c, PhasePoint(0.0, 1 - 1e-8))
    with pytest.raises(BilliardError), np.errstate(all="ignore"):
        chord(c, 0.5, 0.5)
    with pytest.raises(ValueError):
        orbit(c, PhasePoint(0.0, 0.1), -1)


@pytest.mark.parametrize("K", [1, -1, 0])
def test_map_is_area_preserving(perturbed, K):
    c = perturbed[K]
    rng = np.random.default_rng(5)
    for _ in range(10):
        J = map_differential(c, PhasePoint(rng.uniform(0, c.P), rng.uniform(-0.9, 0.9)))
        assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-6)


def test_invariant_measure_monte_carlo(perturbed):
    """Images of 2^17 Sobol points spread over 2 x 2 phase cells in proportion to dx dPhi."""
    c = perturbed[1]
    u = qmc.Sobol(2, seed=6).random(2**17)
    x, Phi = u[:, 0] * c.P, 2 * u[:, 1] - 1
    keep = np.abs(Phi) < 1 - 1e-6
    y, Psi, _, _ = step_arrays(c, x[keep], Phi[keep])
    ix = (y >= c.P / 2).astype(int)
    iphi = (Psi >= 0).astype(int)
    counts = np.bincount(2 * ix + iphi, minlength=4) / keep.sum()
    assert np.max(np.abs(counts - 0.25)) / 0.25 <= 0.01


def test_orbit_csv(circles):
    o = orbit(circles[(1, 0.7)], PhasePoint(0.0, 0.5), 3)
    buf = io.StringIO()
    write_orbit_csv(o, buf)
    lines = buf.getvalue().split("\n")
    assert lines[0] == "n,x,Phi,L,phi,psi,L11,L12,L22"
    assert len(lines) == 5 and lines[-1] == ""
    assert float(lines[2].split(",")[3]) == o.chords.L[1]
