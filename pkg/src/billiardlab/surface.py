"""Geometry kernel for the three constant-curvature model surfaces.

Points live in embedding coordinates:

* ``K = +1``: unit sphere in R^3, restricted to the open upper hemisphere;
* ``K = -1``: upper sheet of the hyperboloid <p, p> = -1 in Minkowski space
  with signature (+, +, -);
* ``K = 0``: the plane z = 0.

The vectorized helpers (``inner``, ``distance``, ``log_dir``, ``expmap``,
``jacobi``) broadcast over leading axes and skip validation; they are what the
billiard code runs in its inner loops. The typed wrappers (``SurfacePoint``,
``TangentVector`` and the ``*_map`` functions) validate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

DOMAIN_TOL = 1e-10
UNIT_TOL = 1e-10


class CurvatureTag(IntEnum):
    HYPERBOLIC = -1
    PLANE = 0
    SPHERE = 1


def as_tag(K) -> CurvatureTag:
    try:
        return CurvatureTag(int(K))
    except ValueError:
        raise ValueError(f"curvature must be one of -1, 0, +1, got {K!r}") from None


def metric(K) -> np.ndarray:
    """Diagonal of the ambient inner product for curvature ``K``."""
    return np.array([1.0, 1.0, -1.0]) if K == -1 else np.ones(3)


def inner(u, v, K):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if K == -1:
        return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2]
    return np.einsum("...i,...i->...", u, v)


def norm(v, K):
    return np.sqrt(np.maximum(inner(v, v, K), 0.0))


def distance(p, q, K):
    """Geodesic distance, in forms that stay accurate for short chords."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if K == 1:
        return np.arctan2(np.linalg.norm(np.cross(p, q), axis=-1), inner(p, q, 1))
    dq = q - p
    if K == -1:
        # <q-p, q-p>_M = 4 sinh^2(d/2)
        return 2.0 * np.arcsinh(0.5 * norm(dq, -1))
    return np.linalg.norm(dq, axis=-1)


def log_dir(p, q, K):
    """Unit initial direction at ``p`` of the geodesic towards ``q``."""
    p = np.asarray(p, dtype=float)
    dq = np.asarray(q, dtype=float) - p
    if K == 1:
        u = dq - inner(p, dq, 1)[..., None] * p
    elif K == -1:
        u = dq + inner(p, dq, -1)[..., None] * p
    else:
        u = dq
    return u / norm(u, K)[..., None]


def expmap(p, v, t, K):
    """Point at arc length ``t`` along the geodesic with unit initial velocity ``v``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    if K == 1:
        return np.cos(t) * p + np.sin(t) * v
    if K == -1:
        return np.cosh(t) * p + np.sinh(t) * v
    return p + t * v


def jacobi(t, K):
    """Normalized Jacobi field ``(Y, Y')`` with Y(0) = 0, Y'(0) = 1."""
    t = np.asarray(t, dtype=float)
    if K == 1:
        return np.sin(t), np.cos(t)
    if K == -1:
        return np.sinh(t), np.cosh(t)
    return t.copy(), np.ones_like(t)


def jacobi_log_derivative(t, K):
    """Y'/Y at ``t``: cot, coth or 1/t."""
    t = np.asarray(t, dtype=float)
    if K == 1:
        return 1.0 / np.tan(t)
    if K == -1:
        return 1.0 / np.tanh(t)
    return 1.0 / t


def project_to_model(p, K):
    """Renormalize an embedding point back onto the model surface."""
    p = np.array(p, dtype=float)
    if K == 1:
        return p / np.linalg.norm(p, axis=-1, keepdims=True)
    if K == -1:
        xy = p[..., :2]
        p[..., 2] = np.sqrt(1.0 + np.sum(xy * xy, axis=-1))
        return p
    p[..., 2] = 0.0
    return p


def model_residual(p, K) -> float:
    p = np.asarray(p, dtype=float)
    if K == 1:
        return float(np.max(np.abs(inner(p, p, 1) - 1.0)))
    if K == -1:
        return float(np.max(np.abs(inner(p, p, -1) + 1.0)))
    return float(np.max(np.abs(p[..., 2])))


# typed wrappers -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    coords: np.ndarray
    tag: CurvatureTag

    def __post_init__(self):
        tag = as_tag(self.tag)
        c = np.array(self.coords, dtype=float).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "coords", c)
        res = model_residual(c, tag)
        if res > UNIT_TOL:
            raise ValueError(f"point {c} is off the K={int(tag)} model (residual {res:.3g})")
        if tag != CurvatureTag.PLANE and c[2] <= 0.0:
            raise ValueError(f"point {c} is not in the open upper half (K={int(tag)})")

    @classmethod
    def origin(cls, tag) -> "SurfacePoint":
        tag = as_tag(tag)
        return cls(np.zeros(3) if tag == CurvatureTag.PLANE else np.array([0.0, 0.0, 1.0]), tag)

    @classmethod
    def polar(cls, tag, r: float, theta: float) -> "SurfacePoint":
        """Point at geodesic distance ``r`` from the origin, at angle ``theta``."""
        tag = as_tag(tag)
        v = np.array([np.cos(theta), np.sin(theta), 0.0])
        return cls(expmap(cls.origin(tag).coords, v, r, int(tag)), tag)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: SurfacePoint
    dir: np.ndarray

    def __post_init__(self):
        d = np.array(self.dir, dtype=float).reshape(3)
        K = int(self.base.tag)
        scale = max(1.0, float(np.linalg.norm(d)))
        if K == 0:
            if abs(d[2]) > UNIT_TOL * scale:
                raise ValueError("planar tangent vectors must have zero third coordinate")
        elif abs(float(inner(d, self.base.coords, K))) > UNIT_TOL * scale:
            raise ValueError("direction is not tangent to the surface at the base point")
        d.setflags(write=False)
        object.__setattr__(self, "dir", d)

    @property
    def norm(self) -> float:
        return float(norm(self.dir, int(self.base.tag)))

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol


@dataclass(frozen=True)
class JacobiScalar:
    t: float
    Y: float
    Yprime: float


def _check_same_tag(p: SurfacePoint, q: SurfacePoint) -> int:
    if p.tag != q.tag:
        raise ValueError(f"mixed curvature tags {int(p.tag)} and {int(q.tag)}")
    return int(p.tag)


def geodesic_distance(p: SurfacePoint, q: SurfacePoint) -> float:
    K = _check_same_tag(p, q)
    if K == 1:
        c = float(inner(p.coords, q.coords, 1))
        if abs(c) > 1.0 + DOMAIN_TOL:
            raise ValueError(f"spherical inner product {c} outside [-1, 1]")
    elif K == -1:
        c = -float(inner(p.coords, q.coords, -1))
        if c < 1.0 - DOMAIN_TOL:
            raise ValueError(f"hyperbolic inner product {c} below 1")
    return float(distance(p.coords, q.coords, K))


def exp_map(v: TangentVector, t: float) -> SurfacePoint:
    if not v.is_unit():
        raise ValueError(f"exp_map needs a unit vector, got norm {v.norm}")
    if t < 0:
        raise ValueError("t must be non-negative")
    K = int(v.base.tag)
    if K == 1 and t >= np.pi:
        raise ValueError("t must stay below pi on the sphere")
    q = project_to_model(expmap(v.base.coords, v.dir, t, K), K)
    return SurfacePoint(q, v.base.tag)


def log_map(p: SurfacePoint, q: SurfacePoint) -> TangentVector:
    K = _check_same_tag(p, q)
    d = geodesic_distance(p, q)
    if d == 0.0:
        raise ValueError("log_map is undefined for coincident points")
    return TangentVector(p, log_dir(p.coords, q.coords, K))


def angle_between(u: TangentVector, w: TangentVector) -> float:
    if u.base.tag != w.base.tag or not np.allclose(u.base.coords, w.base.coords, atol=1e-12):
        raise ValueError("tangent vectors have different base points")
    c = float(inner(u.dir, w.dir, int(u.base.tag)))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def jacobi_Y(t: float, tag) -> JacobiScalar:
    Y, Yp = jacobi(t, int(as_tag(tag)))
    return JacobiScalar(float(t), float(Y), float(Yp))
