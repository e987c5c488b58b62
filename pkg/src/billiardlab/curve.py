"""Smooth strictly convex boundary curves in geodesic polar coordinates.

A curve is the polar graph ``rho(theta)`` about a center point, with ``rho`` a
trigonometric polynomial. Derivatives in ``theta`` are therefore exact, and the
arc length is integrated spectrally from the Fourier series of the speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .surface import CurvatureTag, SurfacePoint, as_tag, inner, project_to_model

DEFAULT_RESOLUTION = 2048
HEMISPHERE_MARGIN = 1e-3
GB_TOL = 1e-6


class CurveError(ValueError):
    """The requested curve violates convexity, hemisphere or resolution constraints."""


@dataclass(frozen=True)
class CurveSpec:
    tag: CurvatureTag
    c0: float
    harmonics: tuple = ()
    center: tuple | None = None

    def __post_init__(self):
        tag = as_tag(self.tag)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "c0", float(self.c0))
        harm = []
        for h in self.harmonics:
            m, a, b = h
            if int(m) != m or m < 1:
                raise CurveError(f"harmonic order must be a positive integer, got {m!r}")
            harm.append((int(m), float(a), float(b)))
        object.__setattr__(self, "harmonics", tuple(harm))
        if self.center is None:
            center = SurfacePoint.origin(tag).coords
        else:
            center = SurfacePoint(np.asarray(self.center, dtype=float), tag).coords
        object.__setattr__(self, "center", tuple(float(c) for c in center))
        if self.c0 <= 0:
            raise CurveError(f"c0 must be positive, got {self.c0}")

    def radial(self, theta):
        """rho, rho', rho'' at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.c0)
        dr = np.zeros_like(theta)
        ddr = np.zeros_like(theta)
        for m, a, b in self.harmonics:
            c, s = np.cos(m * theta), np.sin(m * theta)
            r += a * c + b * s
            dr += m * (b * c - a * s)
            ddr -= m * m * (a * c + b * s)
        return r, dr, ddr

    @property
    def is_circle(self) -> bool:
        return all(a == 0.0 and b == 0.0 for _, a, b in self.harmonics)

    def to_record(self, resolution: int = DEFAULT_RESOLUTION) -> dict:
        return {
            "K": int(self.tag),
            "center": list(self.center),
            "c0": self.c0,
            "harmonics": [list(h) for h in self.harmonics],
            "resolution": int(resolution),
        }

    @classmethod
    def from_record(cls, record: dict) -> tuple["CurveSpec", int]:
        missing = {"K", "c0"} - set(record)
        if missing:
            raise CurveError(f"curve record is missing field(s): {sorted(missing)}")
        spec = cls(
            tag=record["K"],
            c0=record["c0"],
            harmonics=tuple(tuple(h) for h in record.get("harmonics", ())),
            center=record.get("center"),
        )
        return spec, int(record.get("resolution", DEFAULT_RESOLUTION))


def circle_spec(K, r: float, center=None) -> CurveSpec:
    return CurveSpec(tag=K, c0=r, center=center)


def random_fourier_spec(rng: np.random.Generator, K, c0=None, max_order=5, amplitude=0.04):
    """Random small perturbation of a geodesic circle (orders 2..max_order).

    Order 1 is skipped because to first order it only moves the center.
    Convexity is not guaranteed; ``build_curve`` checks it.
    """
    if c0 is None:
        c0 = rng.uniform(0.3, 1.2)
    harmonics = []
    for m in range(2, max_order + 1):
        a, b = rng.uniform(-1.0, 1.0, size=2) * amplitude * c0 / m**2
        harmonics.append((m, a, b))
    return CurveSpec(tag=K, c0=c0, harmonics=tuple(harmonics))


def _isometry(center: np.ndarray, K: int):
    """Linear part and translation of an isometry sending the origin to ``center``."""
    if K == 0:
        return np.eye(3), np.array([center[0], center[1], 0.0])
    x, y, z = center
    if K == 1:
        axis = np.array([-y, x, 0.0])
        s = np.linalg.norm(axis)
        if s < 1e-15:
            return np.eye(3), np.zeros(3)
        axis /= s
        angle = np.arctan2(s, z)
        W = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        R = np.eye(3) + np.sin(angle) * W + (1 - np.cos(angle)) * W @ W
        return R, np.zeros(3)
    r = np.arccosh(max(z, 1.0))
    alpha = np.arctan2(y, x)
    ca, sa = np.cos(alpha), np.sin(alpha)
    rot = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1.0]])
    boost = np.array([[np.cosh(r), 0, np.sinh(r)], [0, 1, 0], [np.sinh(r), 0, np.cosh(r)]])
    return rot @ boost @ rot.T, np.zeros(3)


def _trig(rho, K):
    if K == 1:
        return np.sin(rho), np.cos(rho)
    if K == -1:
        return np.sinh(rho), np.cosh(rho)
    return rho, np.ones_like(rho)


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Sampled boundary curve; build with :func:`build_curve`.

    Sample tables run over ``resolution + 1`` uniform theta values, the last
    one closing the curve at ``theta = 2 pi``.
    """

    spec: CurveSpec
    resolution: int
    theta: np.ndarray
    s: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    k: np.ndarray
    speed: np.ndarray
    P: float
    A: float
    _rotation: np.ndarray = field(repr=False)
    _shift: np.ndarray = field(repr=False)
    _speed_series: tuple = field(repr=False)
    _theta_of_s: PchipInterpolator = field(repr=False)

    @property
    def K(self) -> int:
        return int(self.spec.tag)

    @property
    def tag(self) -> CurvatureTag:
        return self.spec.tag

    # evaluation in theta ----------------------------------------------------

    def frame_theta(self, theta):
        """Position, unit tangent, inward unit normal, curvature and speed at ``theta``."""
        K = self.K
        theta = np.asarray(theta, dtype=float)
        rho, dr, ddr = self.spec.radial(theta)
        S, C = _trig(rho, K)
        ct, st = np.cos(theta), np.sin(theta)
        Z = C if K != 0 else np.zeros_like(C)
        pos = np.stack([S * ct, S * st, Z], axis=-1)
        d1 = np.stack([C * dr * ct - S * st, C * dr * st + S * ct, -K * S * dr], axis=-1)
        radial_part = C * ddr - K * S * dr**2 - S
        d2 = np.stack(
            [
                radial_part * ct - 2 * C * dr * st,
                radial_part * st + 2 * C * dr * ct,
                -K * (C * dr**2 + S * ddr),
            ],
            axis=-1,
        )
        e_rho = np.stack([C * ct, C * st, -K * S], axis=-1)
        v = np.sqrt(inner(d1, d1, K))
        T = d1 / v[..., None]
        # inward normal: minus the part of the outward radial direction normal to T
        n = -(e_rho - inner(e_rho, T, K)[..., None] * T)
        N = n / np.sqrt(inner(n, n, K))[..., None]
        kappa = inner(d2, N, K) / v**2
        R = self._rotation
        pos = pos @ R.T + self._shift
        return pos, T @ R.T, N @ R.T, kappa, v

    def speed_theta(self, theta):
        rho, dr, _ = self.spec.radial(theta)
        S, _ = _trig(rho, self.K)
        return np.sqrt(dr * dr + S * S)

    def arclength(self, theta):
        """Arc length from theta = 0, for any real ``theta``."""
        a0, m, A, B = self._speed_series
        theta = np.asarray(theta, dtype=float)
        mt = theta[..., None] * m
        return a0 * theta + np.sum((A * np.sin(mt) + B * (1.0 - np.cos(mt))) / m, axis=-1)

    def theta_of(self, x):
        """Invert the arc length: the theta with ``arclength(theta) = x``."""
        x = np.asarray(x, dtype=float)
        turns = np.floor(x / self.P)
        r = x - turns * self.P
        th = self._theta_of_s(r)
        for _ in range(3):
            th = th - (self.arclength(th) - r) / self.speed_theta(th)
        return th + 2 * np.pi * turns

    # evaluation in arc length -------------------------------------------------

    def frame(self, x):
        return self.frame_theta(self.theta_of(x))

    def position_at(self, x):
        return self.frame(x)[0]

    def tangent_at(self, x):
        return self.frame(x)[1]

    def curvature_at(self, x):
        return self.frame(x)[3]

    def wrap(self, x):
        return np.mod(x, self.P)

    @property
    def min_curvature(self) -> float:
        return float(np.min(self.k))

    @property
    def total_curvature(self) -> float:
        return _periodic_mean(self.k * self.speed) * 2 * np.pi

    def integrate(self, values) -> float:
        """Integral over the curve (d x) of sample values on the theta grid."""
        return _periodic_mean(np.asarray(values) * self.speed) * 2 * np.pi


def _periodic_mean(samples: np.ndarray) -> float:
    # samples include the closing point; periodic trapezoid drops it
    return float(np.mean(samples[:-1]))


def _speed_series(v: np.ndarray):
    n = v.size
    V = np.fft.rfft(v) / n
    a0 = V[0].real
    A = 2 * V[1 : n // 2].real
    B = -2 * V[1 : n // 2].imag
    mag = np.maximum(np.abs(A), np.abs(B))
    tail = mag[-max(1, n // 16) :]
    if tail.max(initial=0.0) > 1e-13 * a0:
        raise CurveError(
            f"speed spectrum not resolved at resolution {n} (tail {tail.max():.2e}); increase resolution"
        )
    significant = np.nonzero(mag > 1e-15 * a0)[0]
    mmax = significant[-1] + 1 if significant.size else 1
    m = np.arange(1, mmax + 1, dtype=float)
    return a0, m, A[:mmax], B[:mmax]


def build_curve(
    spec: CurveSpec, resolution: int = DEFAULT_RESOLUTION, require_convex: bool = True
) -> BoundaryCurve:
    """Sample ``spec`` on a uniform theta grid and validate convexity.

    ``require_convex=False`` admits non-convex star-shaped curves; only the
    curve-level quantities (area, Gauss-Bonnet, curvature integrals) are
    meaningful for those, not the billiard.
    """
    if resolution < 16:
        raise CurveError(f"resolution must be at least 16, got {resolution}")
    K = int(spec.tag)
    theta = np.linspace(0.0, 2 * np.pi, resolution + 1)
    rho, _, _ = spec.radial(theta)
    if rho.min() <= 0:
        raise CurveError(f"radial function not positive (min {rho.min():.3g})")
    if K == 1 and rho.max() >= np.pi / 2 - HEMISPHERE_MARGIN:
        raise CurveError(f"curve leaves the hemisphere (max rho {rho.max():.6g})")

    R, shift = _isometry(np.asarray(spec.center), K)
    proto = BoundaryCurve(
        spec, resolution, theta, None, None, None, None, None, None, np.nan, np.nan, R, shift, None, None
    )
    pos, T, N, kappa, v = proto.frame_theta(theta)
    if require_convex and kappa.min() <= 0:
        i = int(np.argmin(kappa))
        raise CurveError(f"curve is not strictly convex: k = {kappa[i]:.3g} at theta = {theta[i]:.6g}")
    pos = project_to_model(pos, K)

    series = _speed_series(v[:-1])
    P = 2 * np.pi * series[0]
    if K == 1:
        area_density = 2 * np.sin(rho / 2) ** 2
    elif K == -1:
        area_density = 2 * np.sinh(rho / 2) ** 2
    else:
        area_density = rho**2 / 2
    A = 2 * np.pi * _periodic_mean(area_density)

    object.__setattr__(proto, "_speed_series", series)
    s = proto.arclength(theta)
    s[-1] = P
    if np.any(np.diff(s) <= 0):
        raise CurveError("arc length is not strictly increasing")
    interp = PchipInterpolator(s, theta)
    for name, value in [
        ("s", s),
        ("points", pos),
        ("tangents", T),
        ("normals", N),
        ("k", kappa),
        ("speed", v),
        ("P", float(P)),
        ("A", float(A)),
        ("_theta_of_s", interp),
    ]:
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
        object.__setattr__(proto, name, value)

    res = gauss_bonnet_residual(proto)
    if abs(res) > GB_TOL:
        raise CurveError(f"Gauss-Bonnet residual {res:.3g} exceeds {GB_TOL}; increase resolution")
    return proto


def geodesic_curvature(curve: BoundaryCurve, x):
    k = curve.curvature_at(x)
    return float(k) if np.ndim(k) == 0 else k


def enclosed_area(curve: BoundaryCurve) -> float:
    return curve.A


def perimeter(curve: BoundaryCurve) -> float:
    return curve.P


def gauss_bonnet_residual(curve: BoundaryCurve) -> float:
    """Total geodesic curvature plus K times the area, minus 2 pi."""
    return curve.total_curvature + curve.K * curve.A - 2 * np.pi
