"""Discrete Jacobi fields along billiard configurations.

A window ``[i, j]`` of a configuration has interior points ``i+1 .. j-1``; the
second variation of the action with fixed endpoints is the symmetric
tridiagonal matrix with diagonal ``a_n = L22(x_{n-1}, x_n) + L11(x_n, x_{n+1})``
and off-diagonal ``b_n = L12(x_n, x_{n+1})``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import solve_banded

from .billiard import Configuration, PhasePoint, chord_length, orbit, step_arrays
from .curve import BoundaryCurve

ZERO_TOL = 1e-9
COCYCLE_TOL = 1e-8


@dataclass(frozen=True)
class JacobiSegment:
    """Coefficients on the window ``[start, start + len(b)]``.

    ``a`` has one entry per interior point, ``b`` one per chord.
    """

    a: np.ndarray
    b: np.ndarray
    start: int = 0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if b.size < 1 or a.size != b.size - 1:
            raise ValueError(f"need len(a) == len(b) - 1 >= 0, got {a.size} and {b.size}")
        if np.any(b <= 0):
            raise ValueError("twist violated: some b_n <= 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def stop(self) -> int:
        return self.start + self.b.size

    @property
    def n_interior(self) -> int:
        return self.a.size

    def matrix(self) -> np.ndarray:
        """Dense second-variation matrix over the interior points."""
        m = self.a.size
        H = np.diag(self.a)
        if m > 1:
            off = self.b[1:-1]
            H += np.diag(off, 1) + np.diag(off, -1)
        return H

    def residual(self, xi: np.ndarray) -> np.ndarray:
        """Jacobi-equation residual at the interior points, relative to the field scale."""
        xi = np.asarray(xi, dtype=float)
        a, b = self.a, self.b
        r = b[:-1] * xi[:-2] + a * xi[1:-1] + b[1:] * xi[2:]
        scale = np.abs(b[:-1] * xi[:-2]) + np.abs(a * xi[1:-1]) + np.abs(b[1:] * xi[2:])
        return r / np.where(scale > 0, scale, 1.0)

    def window(self, i: int, j: int) -> "JacobiSegment":
        """Sub-window ``[i, j]`` in absolute configuration indices."""
        lo, hi = i - self.start, j - self.start
        if not (0 <= lo < hi <= self.b.size):
            raise IndexError(f"window [{i}, {j}] outside [{self.start}, {self.stop}]")
        return JacobiSegment(self.a[lo : hi - 1], self.b[lo:hi], i)


@dataclass(frozen=True)
class JacobiField:
    xi: np.ndarray
    start: int = 0


@dataclass(frozen=True)
class ConjugateVerdict:
    pair: tuple | None = None
    witness: JacobiField | None = None

    @property
    def conjugate(self) -> bool:
        return self.pair is not None


class Definiteness(str, Enum):
    NEGATIVE_DEFINITE = "negative definite"
    DEGENERATE = "semidefinite-degenerate"
    INDEFINITE = "indefinite"


def jacobi_coefficients(config: Configuration, i: int = 0, j: int | None = None) -> JacobiSegment:
    """Assemble ``a_n``, ``b_n`` on the window ``[i, j]`` of ``config``."""
    if j is None:
        j = config.n
    if not (0 <= i < j <= config.n):
        raise IndexError(f"window [{i}, {j}] outside configuration of {config.n} chords")
    c = config.chords
    b = np.asarray(c.L12[i:j], dtype=float)
    a = np.asarray(c.L22[i : j - 1], dtype=float) + np.asarray(c.L11[i + 1 : j], dtype=float)
    return JacobiSegment(a, b, i)


def forward_field(seg: JacobiSegment, xi0: float = 0.0, xi1: float = 1.0) -> np.ndarray:
    """Solve the Jacobi recurrence forward across the whole window."""
    a, b = seg.a, seg.b
    xi = np.empty(b.size + 1)
    xi[0], xi[1] = xi0, xi1
    for n in range(1, b.size):
        xi[n + 1] = -(b[n - 1] * xi[n - 1] + a[n - 1] * xi[n]) / b[n]
    return xi


def _first_generalized_zero(xi: np.ndarray) -> int | None:
    """Index k >= 2 of the first zero or sign change of a field with xi[0] = 0, xi[1] > 0."""
    tol = ZERO_TOL * np.max(np.abs(xi))
    for k in range(2, xi.size):
        if abs(xi[k]) <= tol or xi[k - 1] * xi[k] < 0:
            return k
    return None


def conjugate_point_test(seg: JacobiSegment) -> ConjugateVerdict:
    """Search every sub-window for a Jacobi field vanishing at two configuration points.

    The field starting at ``i`` with ``xi_i = 0, xi_{i+1} = 1`` is run forward;
    its first generalized zero ``k`` makes ``(i, k)`` a conjugate pair.
    """
    for i in range(seg.b.size - 1):
        sub = JacobiSegment(seg.a[i:], seg.b[i:], seg.start + i)
        xi = forward_field(sub)
        k = _first_generalized_zero(xi)
        if k is not None:
            return ConjugateVerdict((seg.start + i, seg.start + i + k), JacobiField(xi, seg.start + i))
    return ConjugateVerdict()


def second_variation_definiteness(seg: JacobiSegment, tol: float = ZERO_TOL) -> Definiteness:
    """Inertia of the second variation from an unpivoted LDL^T of its negative."""
    if seg.n_interior < 1:
        raise ValueError("second variation needs at least one interior point")
    a, b = seg.a, seg.b[1:-1]
    scale = np.max(np.abs(a)) + (np.max(b) if b.size else 0.0)
    d = -a[0]
    negatives = 0
    for n in range(a.size):
        if n > 0:
            d = -a[n] - b[n - 1] ** 2 / d
        if abs(d) <= tol * scale:
            return Definiteness.DEGENERATE
        negatives += d < 0
    return Definiteness.NEGATIVE_DEFINITE if negatives == 0 else Definiteness.INDEFINITE


def boundary_field(seg: JacobiSegment, xi_start: float = 1.0, xi_end: float = 0.0) -> np.ndarray:
    """Jacobi field with prescribed values at both ends of the window (tridiagonal solve)."""
    a, b = seg.a, seg.b
    m = a.size
    xi = np.empty(m + 2)
    xi[0], xi[-1] = xi_start, xi_end
    if m == 0:
        return xi
    rhs = np.zeros(m)
    rhs[0] -= b[0] * xi_start
    rhs[-1] -= b[-1] * xi_end
    ab = np.zeros((3, m))
    ab[0, 1:] = b[1:-1]
    ab[1] = a
    ab[2, :-1] = b[1:-1]
    xi[1:-1] = solve_banded((1, 1), ab, rhs)
    return xi


class ConjugatePointsFound(RuntimeError):
    """A boundary-value field changed sign: the orbit has conjugate points."""

    def __init__(self, message, window, index, history):
        super().__init__(message)
        self.window = window
        self.index = index
        self.history = history


@dataclass
class CocycleEstimate:
    nu1: float
    window: int
    converged: bool
    history: list = field(default_factory=list)


def _nu1_raw(seg: JacobiSegment, N: int):
    xi = boundary_field(seg.window(seg.start, seg.start + N))
    interior = xi[1:-1]
    bad = np.nonzero(interior <= 0)[0]
    return xi[1], (int(bad[0]) + 1 if bad.size else None)


def hopf_cocycle(
    curve: BoundaryCurve,
    p: PhasePoint,
    max_window: int = 256,
    tol: float = COCYCLE_TOL,
    config: Configuration | None = None,
) -> CocycleEstimate:
    """Estimate nu_1(p) of the stable positive Jacobi field by doubling windows.

    For each window N the field with xi_0 = 1, xi_N = 0 gives nu_1^(N) = xi_1.
    Where the fields grow linearly (invariant curves) nu_1^(N) = nu_1 + c/N + ...,
    so the Cauchy test runs on the extrapolants 2 nu_1^(2N) - nu_1^(N).
    History entries are ``(N, nu_1^(N), extrapolant or None)``.
    """
    if config is None:
        config = orbit(curve, p, max_window)
    seg = jacobi_coefficients(config, 0, max_window)
    history = []
    prev_raw = prev_ext = None
    N = 4
    while N <= max_window:
        raw, bad = _nu1_raw(seg, N)
        if bad is not None:
            raise ConjugatePointsFound(
                f"boundary field on window {N} changes sign at index {bad}", N, bad, history
            )
        ext = 2 * raw - prev_raw if prev_raw is not None else None
        history.append((N, raw, ext))
        if ext is not None and prev_ext is not None and abs(ext - prev_ext) <= tol and ext > 0:
            return CocycleEstimate(ext, N, True, history)
        prev_raw, prev_ext = raw, ext
        N *= 2
    last = history[-1]
    est = last[2] if last[2] is not None and last[2] > 0 else last[1]
    return CocycleEstimate(est, last[0], False, history)


def window_cocycle(config: Configuration, N: int | None = None) -> np.ndarray:
    """nu_1 at every point of one boundary-value field on ``[0, N]``.

    Entry n is xi_{n+1} / xi_n for the field with xi_0 = 1, xi_N = 0; these values
    satisfy the Jacobi equation exactly, so they are a consistent cocycle sample
    along the orbit whose truncation error is monitored by :func:`hopf_cocycle`.
    """
    if N is None:
        N = config.n
    xi = boundary_field(jacobi_coefficients(config, 0, N))
    if np.any(xi[1:-1] <= 0):
        k = int(np.nonzero(xi[1:-1] <= 0)[0][0]) + 1
        raise ConjugatePointsFound(f"boundary field changes sign at index {k}", N, k, [])
    return xi[1:-1] / xi[:-2]


def monotone_slope(curve: BoundaryCurve, p: PhasePoint, nu1: float) -> float:
    """Slope dPhi/dx of the invariant line through ``p`` spanned by the Jacobi data."""
    _, _, _, ch = step_arrays(curve, p.x, p.Phi)
    return float(-(ch.L11[0] + ch.L12[0] * nu1))


def push_slope(J: np.ndarray, slope: float) -> float:
    """Image slope of the line (1, slope) under the linear map ``J``."""
    dx = J[0, 0] + J[0, 1] * slope
    dphi = J[1, 0] + J[1, 1] * slope
    return float(dphi / dx)


def action(curve: BoundaryCurve, xs) -> float:
    """Sum of chord lengths along the boundary points ``xs``."""
    xs = np.asarray(xs, dtype=float)
    return float(np.sum(chord_length(curve, xs[:-1], xs[1:])))


@dataclass(frozen=True)
class ScanRow:
    orbit_id: int
    x0: float
    Phi0: float
    window: tuple
    verdict: str
    pair: tuple | None


def scan_windows(configs, window: int, orbit_ids=None) -> list[ScanRow]:
    """Conjugate-point verdict on consecutive non-overlapping windows of each configuration."""
    rows = []
    for oid, config in enumerate(configs):
        oid = orbit_ids[oid] if orbit_ids is not None else oid
        for i in range(0, config.n - 1, window):
            j = min(i + window, config.n)
            if j - i < 2:
                continue
            verdict = conjugate_point_test(jacobi_coefficients(config, i, j))
            rows.append(
                ScanRow(
                    oid,
                    float(config.x[0]),
                    float(config.Phi[0]),
                    (i, j),
                    "conjugate" if verdict.conjugate else "none",
                    verdict.pair,
                )
            )
    return rows


def write_scan_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["orbit_id", "x0", "Phi0", "window_start", "window_end", "verdict", "pair_i", "pair_k"])
    for r in rows:
        pi, pk = r.pair if r.pair is not None else ("", "")
        w.writerow([r.orbit_id, f"{r.x0:.17g}", f"{r.Phi0:.17g}", r.window[0], r.window[1], r.verdict, pi, pk])


def hessian_fd(curve: BoundaryCurve, xs, h: float = 1e-4) -> np.ndarray:
    """Finite-difference Hessian of the action in the interior points (endpoints fixed)."""
    xs = np.asarray(xs, dtype=float)
    m = xs.size - 2
    H = np.zeros((m, m))

    def L(a, b):
        return float(chord_length(curve, a, b))

    for r in range(m):
        n = r + 1
        x_prev, x_n, x_next = xs[n - 1], xs[n], xs[n + 1]
        f = lambda t: L(x_prev, t) + L(t, x_next)  # noqa: E731
        H[r, r] = (f(x_n + h) - 2 * f(x_n) + f(x_n - h)) / h**2
        if r + 1 < m:
            y = xs[n + 1]
            H[r, r + 1] = H[r + 1, r] = (
                L(x_n + h, y + h) - L(x_n + h, y - h) - L(x_n - h, y + h) + L(x_n - h, y - h)
            ) / (4 * h * h)
    return H


__all__ = [
    "JacobiSegment",
    "JacobiField",
    "ConjugateVerdict",
    "Definiteness",
    "CocycleEstimate",
    "ConjugatePointsFound",
    "jacobi_coefficients",
    "forward_field",
    "conjugate_point_test",
    "second_variation_definiteness",
    "boundary_field",
    "hopf_cocycle",
    "window_cocycle",
    "monotone_slope",
    "push_slope",
    "action",
    "scan_windows",
    "write_scan_csv",
    "hessian_fd",
]
