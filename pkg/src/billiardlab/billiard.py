"""Billiard ball map on the phase cylinder and chord data of the generating function.

The map ``T(x, Phi) = (y, Psi)`` is solved in the boundary parameter: ``y`` is
the root of ``cos phi(x, y) = Phi``, which is strictly decreasing in ``y``
because ``L12 > 0``. All solvers are vectorized over arrays of phase points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .curve import BoundaryCurve
from .surface import distance, inner, jacobi, log_dir

GRAZING_EPS = 1e-6
STEP_TOL = 1e-12
MAX_ITER = 200


class BilliardError(RuntimeError):
    pass


class GrazingError(BilliardError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BracketError(BilliardError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    x: float
    Phi: float


@dataclass(frozen=True)
class ChordData:
    """Chord between boundary points ``x`` and ``y`` with the second derivatives of L.

    Fields are floats for a single chord or equally shaped arrays for a batch.
    """

    x: np.ndarray
    y: np.ndarray
    L: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    L11: np.ndarray
    L12: np.ndarray
    L22: np.ndarray

    @property
    def Phi(self):
        return np.cos(self.phi)

    @property
    def Psi(self):
        return np.cos(self.psi)

    def __getitem__(self, idx) -> "ChordData":
        return ChordData(*(np.asarray(getattr(self, f))[idx] for f in _CHORD_FIELDS))


_CHORD_FIELDS = ("x", "y", "L", "phi", "psi", "L11", "L12", "L22")


def _chord_pieces(K, fx, fy):
    """Length, angle sines/cosines and L11, L12, L22 from the frames at both ends."""
    p, Tp, Np, kp = fx[:4]
    q, Tq, Nq, kq = fy[:4]
    L = distance(p, q, K)
    u = log_dir(p, q, K)
    w = -log_dir(q, p, K)
    cphi = inner(u, Tp, K)
    sphi = inner(u, Np, K)
    cpsi = inner(w, Tq, K)
    spsi = -inner(w, Nq, K)
    Y, dY = jacobi(L, K)
    cot = dY / Y
    L11 = cot * sphi**2 - kp * sphi
    L22 = cot * spsi**2 - kq * spsi
    L12 = sphi * spsi / Y
    return L, cphi, sphi, cpsi, spsi, L11, L12, L22


def _make_chord(curve, x, y, pieces, check=True) -> ChordData:
    L, cphi, sphi, cpsi, spsi, L11, L12, L22 = pieces
    if check:
        if np.any(L <= 0):
            raise BilliardError("zero-length chord")
        if curve.K == 1 and np.any(L >= np.pi):
            raise BilliardError("chord length reaches pi on the sphere")
        if np.any(L12 <= 0):
            raise BilliardError(f"twist condition violated: min L12 = {np.min(L12):.3g}")
    phi = np.arctan2(sphi, cphi)
    psi = np.arctan2(spsi, cpsi)
    vals = [x, y, L, phi, psi, L11, L12, L22]
    if np.ndim(L) == 0:
        vals = [float(v) for v in vals]
    return ChordData(*vals)


def chord(curve: BoundaryCurve, x, y) -> ChordData:
    """Chord data for boundary arc-length parameters ``x`` and ``y`` (scalars or arrays)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = curve.frame(x)
    fy = curve.frame(y)
    return _make_chord(curve, x, y, _chord_pieces(curve.K, fx, fy))


def chord_length(curve: BoundaryCurve, x, y):
    """Generating function L(x, y) alone."""
    return distance(curve.position_at(x), curve.position_at(y), curve.K)


def _solve_theta(curve: BoundaryCurve, theta_x, Phi):
    """Vectorized root of ``cos phi(theta_x, theta) = Phi`` with theta in (theta_x, theta_x + 2 pi)."""
    K = curve.K
    theta_x = np.atleast_1d(np.asarray(theta_x, dtype=float))
    Phi = np.broadcast_to(np.asarray(Phi, dtype=float), theta_x.shape).copy()
    fx = curve.frame_theta(theta_x)
    delta = 1e-9

    def evaluate(th, idx):
        fy = curve.frame_theta(th)
        fxi = tuple(f[idx] for f in fx[:4])
        pieces = _chord_pieces(K, fxi, fy)
        return pieces, fy[4]

    everything = np.arange(theta_x.size)
    lo = theta_x + delta
    hi = theta_x + 2 * np.pi - delta
    g_lo = evaluate(lo, everything)[0][1] - Phi
    g_hi = evaluate(hi, everything)[0][1] - Phi
    bad = ~((g_lo > 0) & (g_hi < 0))
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise BracketError(
            f"no bracket for Phi={Phi[i]!r} at theta={theta_x[i]!r}: "
            f"g(lo)={g_lo[i]:.3g}, g(hi)={g_hi[i]:.3g}"
        )

    for _ in range(12):
        mid = 0.5 * (lo + hi)
        g = evaluate(mid, everything)[0][1] - Phi
        pos = g > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)

    t = 0.5 * (lo + hi)
    g_prev = np.full_like(t, np.inf)
    stalls = np.zeros(t.shape, dtype=int)
    done = np.zeros(t.shape, dtype=bool)
    g_final = np.full_like(t, np.nan)
    for _ in range(MAX_ITER - 12):
        idx = np.nonzero(~done)[0]
        if idx.size == 0:
            break
        ti = t[idx]
        pieces, v = evaluate(ti, idx)
        g = pieces[1] - Phi[idx]
        g_final[idx] = g
        lo_i = np.where(g > 0, ti, lo[idx])
        hi_i = np.where(g > 0, hi[idx], ti)
        lo[idx], hi[idx] = lo_i, hi_i
        converged = (np.abs(g) <= 1e-14) | (hi_i - lo_i <= 4e-16 * np.abs(ti))
        stalls[idx] += np.abs(g) > 0.5 * np.abs(g_prev[idx])
        g_prev[idx] = g
        # d/dtheta cos phi = -L12 * speed
        newton = ti + g / (pieces[6] * v)
        use_bisect = (stalls[idx] >= 3) | ~((newton > lo_i) & (newton < hi_i))
        t_new = np.where(use_bisect, 0.5 * (lo_i + hi_i), newton)
        t[idx] = np.where(converged, ti, t_new)
        done[idx] = converged
    if not np.all(done) or np.any(np.abs(g_final) > STEP_TOL):
        i = int(np.nanargmax(np.where(done, np.abs(g_final), np.inf)))
        raise BilliardError(f"billiard step did not converge (residual {g_final[i]:.3g})")
    return t


def step_arrays(curve: BoundaryCurve, x, Phi, eps: float = GRAZING_EPS):
    """Apply the billiard map to arrays of phase points.

    Returns ``(y, Psi, increment, chord)`` with ``y`` wrapped to [0, P) and
    ``increment`` the arc length from x to y in (0, P).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Phi = np.broadcast_to(np.asarray(Phi, dtype=float), x.shape)
    if np.any(np.abs(Phi) >= 1 - eps):
        raise GrazingError(f"grazing input: max |Phi| = {np.max(np.abs(Phi))!r}")
    xw = curve.wrap(x)
    theta_x = curve.theta_of(xw)
    theta_y = _solve_theta(curve, theta_x, Phi)
    increment = curve.arclength(theta_y) - xw
    y = curve.wrap(xw + increment)
    fx = curve.frame_theta(theta_x)
    fy = curve.frame_theta(theta_y)
    ch = _make_chord(curve, xw, y, _chord_pieces(curve.K, fx, fy))
    return y, np.cos(ch.psi), increment, ch


def billiard_step(curve: BoundaryCurve, p: PhasePoint, eps: float = GRAZING_EPS) -> PhasePoint:
    y, Psi, _, _ = step_arrays(curve, p.x, p.Phi, eps)
    return PhasePoint(float(y[0]), float(Psi[0]))


@dataclass(frozen=True)
class Configuration:
    """Orbit segment: ``n + 1`` boundary points and the ``n`` chords between them."""

    x: np.ndarray
    Phi: np.ndarray
    increments: np.ndarray
    chords: ChordData

    @property
    def n(self) -> int:
        return int(self.increments.size)

    @property
    def x_unwrapped(self) -> np.ndarray:
        return self.x[0] + np.concatenate([[0.0], np.cumsum(self.increments)])

    def phase_point(self, i: int) -> PhasePoint:
        return PhasePoint(float(self.x[i]), float(self.Phi[i]))

    def shift(self, k: int) -> "Configuration":
        """The same orbit started at its k-th point (drops the first k chords)."""
        if not 0 <= k <= self.n:
            raise IndexError(f"shift {k} outside 0..{self.n}")
        return Configuration(self.x[k:], self.Phi[k:], self.increments[k:], self.chords[k:])

    def reflection_defect(self) -> np.ndarray:
        """psi_n - phi_{n+1} at every interior vertex."""
        return self.chords.psi[:-1] - self.chords.phi[1:]

    def euler_lagrange_residual(self) -> np.ndarray:
        """L2(x_{n-1}, x_n) + L1(x_n, x_{n+1}) = cos psi_{n-1} - cos phi_n."""
        return np.cos(self.chords.psi[:-1]) - np.cos(self.chords.phi[1:])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_orbit_csv(self, fh)


def write_orbit_csv(config: Configuration, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "x", "Phi", "L", "phi", "psi", "L11", "L12", "L22"])
    c = config.chords
    for i in range(config.n):
        row = [config.x[i], config.Phi[i], c.L[i], c.phi[i], c.psi[i], c.L11[i], c.L12[i], c.L22[i]]
        w.writerow([i] + [f"{v:.17g}" for v in row])


def orbit_batch(curve: BoundaryCurve, x0, Phi0, n: int, eps: float = GRAZING_EPS) -> list[Configuration]:
    """``n`` bounces from each of several starting points, advanced together."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    Phi = np.broadcast_to(np.asarray(Phi0, dtype=float), x.shape).copy()
    xs, Phis, incs, chords = [curve.wrap(x)], [Phi], [], []
    for i in range(n):
        if np.any(np.abs(Phi) >= 1 - eps):
            raise GrazingError(f"orbit grazes the boundary at iterate {i}", index=i)
        x, Phi, inc, ch = step_arrays(curve, x, Phi, eps)
        xs.append(x)
        Phis.append(Phi)
        incs.append(inc)
        chords.append(ch)
    X = np.array(xs)
    F = np.array(Phis)
    Inc = np.array(incs).reshape(n, x.size)
    fields = {
        f: np.array([getattr(c, f) for c in chords]).reshape(n, x.size) for f in _CHORD_FIELDS
    }
    out = []
    for j in range(x.size):
        ch = ChordData(*(fields[f][:, j] for f in _CHORD_FIELDS))
        out.append(Configuration(X[:, j], F[:, j], Inc[:, j], ch))
    return out


def orbit(curve: BoundaryCurve, p: PhasePoint, n: int, eps: float = GRAZING_EPS) -> Configuration:
    if n < 0:
        raise ValueError("n must be non-negative")
    return orbit_batch(curve, p.x, p.Phi, n, eps)[0]


def map_differential(curve: BoundaryCurve, p: PhasePoint, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of T at ``p`` in (x, Phi) coordinates."""
    xs = np.array([p.x + h, p.x - h, p.x, p.x])
    Fs = np.array([p.Phi, p.Phi, p.Phi + h, p.Phi - h])
    _, Psi, inc, _ = step_arrays(curve, xs, Fs)
    y = xs + inc
    J = np.empty((2, 2))
    J[0, 0] = (y[0] - y[1]) / (2 * h)
    J[1, 0] = (Psi[0] - Psi[1]) / (2 * h)
    J[0, 1] = (y[2] - y[3]) / (2 * h)
    J[1, 1] = (Psi[2] - Psi[3]) / (2 * h)
    return J
