import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from billiardlab.surface import (
    SurfacePoint,
    TangentVector,
    angle_between,
    exp_map,
    geodesic_distance,
    inner,
    jacobi,
    jacobi_Y,
    log_map,
    model_residual,
    project_to_model,
)

TAGS = (1, -1, 0)


def random_point(rng, K, rmax=1.2):
    return SurfacePoint.polar(K, rng.uniform(0, rmax), rng.uniform(0, 2 * np.pi))


def unit_tangent(p, angle):
    """Unit tangent at p obtained by transporting (cos a, sin a, 0) from the origin direction."""
    K = int(p.tag)
    e = np.array([np.cos(angle), np.sin(angle), 0.0])
    if K == 0:
        return TangentVector(p, e)
    x = p.coords
    d = e - (inner(e, x, K) / inner(x, x, K)) * x
    return TangentVector(p, d / np.sqrt(inner(d, d, K)))


def acosh_distance(p, q, K):
    # textbook closed forms used as an independent oracle
    if K == 1:
        return np.arccos(np.clip(p @ q, -1, 1))
    if K == -1:
        return np.arccosh(max(p[2] * q[2] - p[0] * q[0] - p[1] * q[1], 1.0))
    return np.linalg.norm(p - q)


@pytest.mark.parametrize("K", TAGS)
def test_distance_matches_textbook_formula(K):
    rng = np.random.default_rng(1)
    for _ in range(100):
        p, q = random_point(rng, K), random_point(rng, K)
        assert geodesic_distance(p, q) == pytest.approx(acosh_distance(p.coords, q.coords, K), abs=1e-7)


def test_distance_is_stable_for_nearby_points():
    p = SurfacePoint.polar(-1, 0.5, 0.3)
    q = SurfacePoint.polar(-1, 0.5 + 1e-9, 0.3)
    assert geodesic_distance(p, q) == pytest.approx(1e-9, rel=1e-6)


@pytest.mark.parametrize("K", TAGS)
def test_exp_identity_and_roundtrip(K):
    rng = np.random.default_rng(2)
    for _ in range(100):
        p, q = random_point(rng, K), random_point(rng, K)
        if geodesic_distance(p, q) < 1e-6:
            continue
        v = log_map(p, q)
        assert v.is_unit()
        back = exp_map(v, geodesic_distance(p, q))
        assert np.max(np.abs(back.coords - q.coords)) <= 1e-10
        assert np.allclose(exp_map(v, 0.0).coords, p.coords, atol=0)


def test_quarter_great_circle_reaches_equator():
    pole = SurfacePoint.origin(1)
    q = exp_map(TangentVector(pole, [0.6, 0.8, 0.0]), np.pi / 2)
    assert q.coords[2] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(q.coords[:2], [0.6, 0.8])


def test_log_map_examples():
    v = log_map(SurfacePoint([0, 0, 0], 0), SurfacePoint([3, 4, 0], 0))
    assert np.allclose(v.dir, [0.6, 0.8, 0.0], atol=1e-15)
    eq = SurfacePoint([np.cos(1.5), 0.0, np.sin(1.5)], 1)
    v = log_map(SurfacePoint.origin(1), eq)
    assert np.allclose(v.dir, [1, 0, 0], atol=1e-12)
    with pytest.raises(ValueError):
        log_map(eq, eq)


def test_validation_errors():
    with pytest.raises(ValueError):
        SurfacePoint([0.0, 0.0, -1.0], 1)
    with pytest.raises(ValueError):
        SurfacePoint([0.1, 0.0, 1.0], 1)
    with pytest.raises(ValueError):
        exp_map(TangentVector(SurfacePoint.origin(1), [2.0, 0.0, 0.0]), 0.5)
    with pytest.raises(ValueError):
        geodesic_distance(SurfacePoint.origin(1), SurfacePoint.origin(-1))


@pytest.mark.parametrize("K", TAGS)
def test_angle_between(K):
    rng = np.random.default_rng(3)
    p = random_point(rng, K)
    u = unit_tangent(p, 0.3)
    assert angle_between(u, u) == pytest.approx(0.0, abs=1e-7)
    # orthogonal direction through the metric
    w = unit_tangent(p, 1.1)
    d = w.dir - inner(w.dir, u.dir, K) * u.dir
    d = d / np.sqrt(inner(d, d, K))
    assert angle_between(u, TangentVector(p, d)) == pytest.approx(np.pi / 2, abs=1e-12)
    with pytest.raises(ValueError):
        angle_between(u, unit_tangent(random_point(rng, K), 0.0))


def test_angle_invariant_under_rotation():
    rng = np.random.default_rng(4)
    from scipy.spatial.transform import Rotation

    for _ in range(20):
        p = random_point(rng, 1, 1.0)
        u, w = unit_tangent(p, rng.uniform(0, 6)), unit_tangent(p, rng.uniform(0, 6))
        R = Rotation.from_rotvec(rng.normal(size=3) * 0.2).as_matrix()
        q = SurfacePoint(R @ p.coords, 1)
        a = angle_between(u, w)
        b = angle_between(TangentVector(q, R @ u.dir), TangentVector(q, R @ w.dir))
        assert a == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("K", TAGS)
def test_triangle_equality_along_geodesics(K):
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = random_point(rng, K)
        v = unit_tangent(p, rng.uniform(0, 2 * np.pi))
        t = rng.uniform(0.01, 1.2)
        s = rng.uniform(0, t)
        a, b = exp_map(v, s), exp_map(v, t)
        try:
            total = geodesic_distance(p, a) + geodesic_distance(a, b)
        except ValueError:
            continue
        assert total == pytest.approx(t, abs=1e-9)


def test_model_constraint_survives_long_compositions():
    rng = np.random.default_rng(6)
    for K in (1, -1):
        p = SurfacePoint.origin(K)
        for _ in range(1000):
            v = unit_tangent(p, rng.uniform(0, 2 * np.pi))
            q = exp_map(v, rng.uniform(0.0, 0.2))
            if q.coords[2] < 0.3:
                continue
            p = q
        assert model_residual(p.coords, K) <= 1e-10
    assert model_residual(project_to_model(np.array([0.0, 0.0, 1.3]), 1), 1) <= 1e-15


def test_jacobi_examples():
    for K in TAGS:
        J = jacobi_Y(0.0, K)
        assert (J.Y, J.Yprime) == (0.0, 1.0)
    J = jacobi_Y(np.pi / 2, 1)
    assert J.Y == pytest.approx(1.0) and J.Yprime == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 3.0), st.sampled_from(TAGS))
def test_jacobi_ode_and_derivative(t, K):
    h = 1e-5
    Y, Yp = jacobi(t, K)
    Yl, _ = jacobi(t - h, K)
    Yr, _ = jacobi(t + h, K)
    assert (Yr - Yl) / (2 * h) == pytest.approx(Yp, abs=1e-6)
    assert abs((Yr - 2 * Y + Yl) / h**2 + K * Y) <= 1e-3


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.0, 1.0), st.sampled_from(TAGS))
def test_wronskian_identity(L, frac, K):
    if K == 1:
        L = min(L, np.pi - 1e-3)
    a = frac * L
    YL, dYL = jacobi(L, K)
    Ya, _ = jacobi(a, K)
    Yb, dYb = jacobi(L - a, K)
    assert Ya == pytest.approx(YL * dYb - dYL * Yb, abs=1e-12)


def test_distance_examples():
    pole = SurfacePoint.origin(1)
    q = SurfacePoint([np.sin(0.7), 0.0, np.cos(0.7)], 1)
    assert geodesic_distance(pole, q) == pytest.approx(0.7, abs=1e-15)
    assert geodesic_distance(q, pole) == geodesic_distance(pole, q)
    v = SurfacePoint.origin(-1)
    assert geodesic_distance(v, SurfacePoint([np.sinh(1.0), 0.0, np.cosh(1.0)], -1)) == pytest.approx(1.0, abs=1e-15)
    for K in TAGS:
        p = SurfacePoint.polar(K, 0.4, 1.0)
        assert geodesic_distance(p, p) == 0.0
