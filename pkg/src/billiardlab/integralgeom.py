"""Phase-space integrals and the curvature inequalities that characterize circles.

The rigidity functional is ``I = int sqrt(k^2 + K) dx``. For geodesic circles
it equals 2 pi exactly; otherwise ``I > 2 pi`` on the hemisphere and, for
horocyclically convex curves (k > 1), ``I < 2 pi`` on the hyperbolic plane.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .billiard import step_arrays
from .curve import BoundaryCurve, gauss_bonnet_residual
from .surface import as_tag

DEFAULT_GRID = (256, 64)
BLOCK_ROWS = 32
QUADRATURE_EPS = 1e-14
CIRCLE_TOL = 1e-6
GB_TOL = 1e-6
ISO_TOL = 1e-9


class HorocycleConvexityError(ValueError):
    """A hyperbolic curve with min k <= 1 is not convex with respect to horocycles."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    grid: tuple
    doubled: float | None = None

    @property
    def delta(self) -> float | None:
        return None if self.doubled is None else self.doubled - self.value


def _phase_nodes(curve: BoundaryCurve, grid):
    n_x, n_phi = (int(g) for g in grid)
    if n_x < 16 or n_phi < 16:
        raise ValueError(f"grid sizes must be at least 16, got {grid}")
    x = np.arange(n_x) * (curve.P / n_x)
    t, w = np.polynomial.legendre.leggauss(n_phi)
    phi = 0.5 * np.pi * (t + 1)
    w_phi = 0.5 * np.pi * w
    return x, phi, w_phi


def phase_average_length(curve: BoundaryCurve, grid=DEFAULT_GRID, workers: int = 1) -> float:
    """Integral of the chord length against sin(phi) dx dphi over the phase cylinder.

    Periodic trapezoid in x, Gauss-Legendre in phi; every node is one billiard step.
    The x-grid is cut into fixed blocks summed in order, so the value does not
    depend on ``workers``.
    """
    x, phi, w_phi = _phase_nodes(curve, grid)
    weight = np.sin(phi) * w_phi
    Phi = np.cos(phi)

    def block(start):
        xb = x[start : start + BLOCK_ROWS]
        X, F = np.meshgrid(xb, Phi, indexing="ij")
        _, _, _, ch = step_arrays(curve, X.ravel(), F.ravel(), eps=QUADRATURE_EPS)
        return float(np.sum(ch.L.reshape(X.shape) * weight[None, :]))

    starts = range(0, x.size, BLOCK_ROWS)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            sums = list(pool.map(block, starts))
    else:
        sums = [block(i) for i in starts]
    return float((curve.P / x.size) * sum(sums))


def santalo_quadrature(
    curve: BoundaryCurve, grid=DEFAULT_GRID, doubling: bool = True, workers: int = 1
) -> QuadratureResult:
    value = phase_average_length(curve, grid, workers)
    doubled = phase_average_length(curve, (2 * grid[0], 2 * grid[1]), workers) if doubling else None
    return QuadratureResult(value, tuple(grid), doubled)


def santalo_residual(curve: BoundaryCurve, grid=DEFAULT_GRID) -> float:
    """Phase-space integral of L minus 2 pi times the enclosed area."""
    return phase_average_length(curve, grid) - 2 * np.pi * curve.A


def inner_integrand(phi, k, tag):
    K = int(as_tag(tag))
    s = np.sin(phi)
    if K == -1:
        return np.arctanh(s / k) * s
    if K == 1:
        return np.arctan(s / k) * s
    return s * s / k


def inner_integral(k, tag):
    """Closed form of the integral of ``inner_integrand`` over phi in (0, pi/2).

    K = -1: (pi/2)(k - sqrt(k^2 - 1)), needs k > 1.
    K = +1: (pi/2)(sqrt(k^2 + 1) - k).
    K = 0: pi / (4 k), the planar analogue with Y'/Y = 1/t.
    """
    K = int(as_tag(tag))
    k = np.asarray(k, dtype=float)
    if K == -1:
        if np.any(k <= 1):
            raise HorocycleConvexityError(f"inner integral needs k > 1 on the hyperbolic plane, got {k}")
        # k - sqrt(k^2 - 1) = 1 / (k + sqrt(k^2 - 1)), stable for large k
        out = 0.5 * np.pi / (k + np.sqrt(k * k - 1))
    elif K == 1:
        if np.any(k <= 0):
            raise ValueError("inner integral needs k > 0")
        out = 0.5 * np.pi / (np.sqrt(k * k + 1) + k)
    else:
        out = np.pi / (4 * k)
    return float(out) if out.ndim == 0 else out


def rigidity_integral(curve: BoundaryCurve) -> float:
    """``int sqrt(k^2 + K) dx`` by the periodic trapezoid rule on the sample table."""
    K = curve.K
    if K == -1 and curve.min_curvature <= 1:
        raise HorocycleConvexityError(
            f"min k = {curve.min_curvature:.6g} <= 1: curve is not convex with respect to horocycles"
        )
    return curve.integrate(np.sqrt(curve.k**2 + K))


def isoperimetric_deficit(curve: BoundaryCurve) -> float:
    """P^2 - 4 pi A + K A^2, zero exactly for geodesic circles."""
    return curve.P**2 - 4 * np.pi * curve.A + curve.K * curve.A**2


def area_lower_bound(curve: BoundaryCurve) -> float:
    """Curvature integral that the area dominates when the mirror equation holds.

    Sphere: int (sqrt(k^2 + 1) - k) dx. Hyperbolic: int (k - sqrt(k^2 - 1)) dx.
    """
    k = curve.k
    if curve.K == 1:
        return curve.integrate(1.0 / (np.sqrt(k * k + 1) + k))
    if curve.K == -1:
        if curve.min_curvature <= 1:
            raise HorocycleConvexityError("area bound needs k > 1")
        return curve.integrate(1.0 / (k + np.sqrt(k * k - 1)))
    raise ValueError("no area bound on the plane")


def cauchy_schwarz_bound(curve: BoundaryCurve) -> float:
    """Right-hand side of the Cauchy-Schwarz step, compared against I.

    Hyperbolic: sqrt((A + 2pi - P)(A + 2pi + P)), an upper bound for I.
    Sphere: sqrt(P^2 + (2pi - A)^2), a lower bound for I.
    """
    P, A = curve.P, curve.A
    if curve.K == -1:
        return float(np.sqrt(max((A + 2 * np.pi - P) * (A + 2 * np.pi + P), 0.0)))
    if curve.K == 1:
        return float(np.sqrt(P**2 + (2 * np.pi - A) ** 2))
    raise ValueError("no Cauchy-Schwarz chain on the plane")


class Verdict(str, Enum):
    CIRCLE = "circle-consistent"
    NONCIRCULAR = "strictly-noncircular"
    INVALID = "invalid-input"


@dataclass
class AuditReport:
    tag: int
    P: float
    A: float
    santalo_lhs: float
    santalo_rhs: float
    santalo_delta: float | None
    rigidity_I: float
    iso_deficit: float
    gb_residual: float
    min_k: float
    horocycle_ok: bool
    area_bound: float
    cauchy_schwarz: float
    verdict: Verdict
    diagnostics: list = field(default_factory=list)

    @property
    def rigidity_gap(self) -> float:
        return self.rigidity_I - 2 * np.pi

    @property
    def santalo_relative_residual(self) -> float:
        return (self.santalo_lhs - self.santalo_rhs) / self.santalo_rhs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["rigidity_gap"] = self.rigidity_gap
        d["santalo_relative_residual"] = self.santalo_relative_residual
        return d

    def csv_line(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(
            [self.tag, self.verdict.value]
            + [
                f"{v:.17g}" if v is not None else ""
                for v in (
                    self.P,
                    self.A,
                    self.santalo_lhs,
                    self.santalo_rhs,
                    self.rigidity_I,
                    self.iso_deficit,
                    self.gb_residual,
                    self.min_k,
                )
            ]
        )
        return buf.getvalue()


AUDIT_CSV_HEADER = "K,verdict,P,A,santalo_lhs,santalo_rhs,rigidity_I,iso_deficit,gb_residual,min_k\n"


def rigidity_audit(
    curve: BoundaryCurve, grid=DEFAULT_GRID, tol: float = CIRCLE_TOL, doubling: bool = True, workers: int = 1
) -> AuditReport:
    """Assemble the full integral-geometry report for one curve."""
    K = curve.K
    diagnostics = []
    santalo = santalo_quadrature(curve, grid, doubling=doubling, workers=workers)
    gb = gauss_bonnet_residual(curve)
    iso = isoperimetric_deficit(curve)
    min_k = curve.min_curvature
    horocycle_ok = K != -1 or min_k > 1
    nan = float("nan")
    I = bound = cs = nan

    if K == 0:
        diagnostics.append("no rigidity audit is defined on the plane")
    elif not horocycle_ok:
        diagnostics.append(f"min k = {min_k:.6g} <= 1: not convex with respect to horocycles")
    else:
        I = rigidity_integral(curve)
        bound = area_lower_bound(curve)
        cs = cauchy_schwarz_bound(curve)

    if K == 0 or not horocycle_ok:
        verdict = Verdict.INVALID
    else:
        iso_scale = max(curve.P**2, 1.0)
        circle = abs(I - 2 * np.pi) <= tol and abs(gb) <= GB_TOL and abs(iso) <= ISO_TOL * iso_scale
        verdict = Verdict.CIRCLE if circle else Verdict.NONCIRCULAR
        if abs(gb) > GB_TOL:
            diagnostics.append(f"Gauss-Bonnet residual {gb:.3g} above {GB_TOL}")
        if iso < -ISO_TOL * iso_scale:
            diagnostics.append(f"negative isoperimetric deficit {iso:.3g}")

    return AuditReport(
        tag=K,
        P=curve.P,
        A=curve.A,
        santalo_lhs=santalo.value,
        santalo_rhs=2 * np.pi * curve.A,
        santalo_delta=santalo.delta,
        rigidity_I=I,
        iso_deficit=iso,
        gb_residual=gb,
        min_k=min_k,
        horocycle_ok=horocycle_ok,
        area_bound=bound,
        cauchy_schwarz=cs,
        verdict=verdict,
        diagnostics=diagnostics,
    )
