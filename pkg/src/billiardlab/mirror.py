"""Mirror formula, caustic distances and the Wronskian identities behind them."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .billiard import Configuration
from .curve import BoundaryCurve
from .surface import as_tag, jacobi, jacobi_log_derivative

MAX_BISECT = 60
RATIO_TOL = 1e-12


@dataclass(frozen=True)
class CausticDistance:
    """Distance ``a`` from the bounce point to the focusing point on a chord of length ``L``.

    ``iterations`` and ``min_certificate`` record the bisection run: the smallest
    value of d/da [Y(a) / Y(L - a)] seen at a midpoint.
    """

    a: float
    L: float
    target: float
    K: int
    iterations: int
    min_certificate: float

    @property
    def ratio_residual(self) -> float:
        return float(caustic_ratio(self.a, self.L, self.K)) - self.target


def caustic_ratio(a, L, K):
    Ya, _ = jacobi(a, K)
    Yb, _ = jacobi(np.asarray(L) - a, K)
    return Ya / Yb


def _ratio_derivative(a, L, K):
    # Y'(a) Y(L-a) + Y(a) Y'(L-a), which equals Y(L) by the Wronskian
    Ya, dYa = jacobi(a, K)
    Yb, dYb = jacobi(L - a, K)
    return (dYa * Yb + Ya * dYb) / Yb**2


def solve_caustic_distance(L: float, phi0: float, phi1: float, nu1: float, tag) -> CausticDistance:
    """Unique ``a`` in (0, L) with ``Y(a) / Y(L - a) = sin(phi0) / (nu1 sin(phi1))``."""
    K = int(as_tag(tag))
    if L <= 0 or (K == 1 and L >= np.pi):
        raise ValueError(f"chord length {L} out of range for K={K}")
    target = np.sin(phi0) / (nu1 * np.sin(phi1))
    if not target > 0 or not np.isfinite(target):
        raise ValueError(f"caustic target ratio must be positive and finite, got {target}")
    lo, hi = 0.0, float(L)
    a = 0.5 * L
    min_cert = np.inf
    it = 0
    for it in range(1, MAX_BISECT + 1):
        a = 0.5 * (lo + hi)
        min_cert = min(min_cert, float(_ratio_derivative(a, L, K)))
        r = float(caustic_ratio(a, L, K))
        if abs(r - target) <= RATIO_TOL * target or not lo < a < hi:
            break
        if r < target:
            lo = a
        else:
            hi = a
    return CausticDistance(float(a), float(L), float(target), K, it, min_cert)


def caustic_distances(L, phi0, phi1, nu1, K) -> np.ndarray:
    """Vectorized bisection for arrays of chords; returns the distances only."""
    L = np.asarray(L, dtype=float)
    target = np.sin(phi0) / (np.asarray(nu1) * np.sin(phi1))
    lo = np.zeros_like(L)
    hi = L.copy()
    for _ in range(MAX_BISECT):
        a = 0.5 * (lo + hi)
        below = caustic_ratio(a, L, K) < target
        lo = np.where(below, a, lo)
        hi = np.where(below, hi, a)
    return 0.5 * (lo + hi)


def mirror_residual(curve: BoundaryCurve, config: Configuration, nu1) -> np.ndarray:
    """Per-bounce residual of the mirror equation along ``config``.

    ``nu1[n]`` is the cocycle value at the n-th phase point (NaN where unknown).
    Entry ``n - 1`` of the result is the residual at bounce point ``x_n``:

        Y'/Y(a_n) + Y'/Y(L_{n-1} - a_{n-1}) - 2 k(x_n) / sin(phi_n)
    """
    K = curve.K
    c = config.chords
    nu1 = np.asarray(nu1, dtype=float)[: config.n]
    nu1 = np.concatenate([nu1, np.full(config.n - nu1.size, np.nan)])
    good = np.isfinite(nu1) & (nu1 > 0)
    a = np.full(config.n, np.nan)
    if np.any(good):
        a[good] = caustic_distances(c.L[good], c.phi[good], c.psi[good], nu1[good], K)
    k = curve.curvature_at(config.x[1 : config.n])
    res = (
        jacobi_log_derivative(a[1:], K)
        + jacobi_log_derivative(c.L[:-1] - a[:-1], K)
        - 2 * k / np.sin(c.phi[1:])
    )
    return res


def wronskian_identities_residual(L: float, a: float, tag) -> tuple[float, float]:
    """Residuals of Y(a) = Y(L)Y'(L-a) - Y'(L)Y(L-a) and Y(L-a) = Y(L)Y'(a) - Y(a)Y'(L)."""
    K = int(as_tag(tag))
    YL, dYL = jacobi(L, K)
    Ya, dYa = jacobi(a, K)
    Yb, dYb = jacobi(L - a, K)
    r1 = Ya - (YL * dYb - dYL * Yb)
    r2 = Yb - (YL * dYa - Ya * dYL)
    return float(r1), float(r2)


def jacobi_and_mirror_forms(K, L_prev, L_cur, phi_prev, phi0, phi1, k0, nu_prev, nu1):
    """Both sides of the Jacobi equation at a bounce, in two algebraic forms.

    Returns ``(jacobi_lhs / sin^2 phi0, mirror_lhs - mirror_rhs)`` where the first
    is the Jacobi equation with the second derivatives of L substituted, and the
    second is its rewriting with the Y'/Y terms grouped (equal when exact).
    ``nu_prev`` is nu_{-1}(x_0) = xi_{-1} / xi_0.
    """
    s_prev, s0, s1 = np.sin(phi_prev), np.sin(phi0), np.sin(phi1)
    Yp, dYp = jacobi(L_prev, K)
    Yc, dYc = jacobi(L_cur, K)
    L12_prev = s_prev * s0 / Yp
    L22_prev = dYp / Yp * s0**2 - k0 * s0
    L11_cur = dYc / Yc * s0**2 - k0 * s0
    L12_cur = s0 * s1 / Yc
    jac = (L12_prev * nu_prev + L22_prev + L11_cur + L12_cur * nu1) / s0**2
    grouped = (
        nu_prev * s_prev / (Yp * s0) + dYp / Yp + dYc / Yc + nu1 * s1 / (Yc * s0) - 2 * k0 / s0
    )
    return float(jac), float(grouped)


def write_residual_csv(a, L, residual, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["bounce", "a", "L", "residual"])
    for i, (ai, Li, ri) in enumerate(zip(a, L, residual)):
        w.writerow([i, f"{ai:.17g}", f"{Li:.17g}", f"{ri:.17g}"])


def cot_mean_gap(a, b):
    """(cot a + cot b)/2 - cot((a + b)/2); non-negative when (a+b)/2 <= pi/2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.5 * (1 / np.tan(a) + 1 / np.tan(b)) - 1 / np.tan(0.5 * (a + b))


def coth_mean_gap(a, b):
    """(coth a + coth b)/2 - coth((a + b)/2); non-negative for a, b > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.5 * (1 / np.tanh(a) + 1 / np.tanh(b)) - 1 / np.tanh(0.5 * (a + b))
