"""Command line entry point: ``billiardlab <subcommand> [options]``.

Experiments are described by a YAML file. Each run writes ``report.json`` plus
CSV tables into the output directory. Exit status is 0 on success, 2 on an
invalid configuration and 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .acceptance import run_all
from .billiard import BilliardError, PhasePoint, orbit, orbit_batch, write_orbit_csv
from .curve import DEFAULT_RESOLUTION, CurveError, CurveSpec, build_curve, gauss_bonnet_residual
from .integralgeom import (
    AUDIT_CSV_HEADER,
    DEFAULT_GRID,
    HorocycleConvexityError,
    rigidity_audit,
    rigidity_integral,
    santalo_quadrature,
)
from .mirror import caustic_distances, mirror_residual, write_residual_csv
from .variational import (
    COCYCLE_TOL,
    ConjugatePointsFound,
    hopf_cocycle,
    scan_windows,
    window_cocycle,
    write_scan_csv,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
THREADS_ENV = "BILLIARDLAB_THREADS"
SUBCOMMANDS = ("curve", "orbit", "conjugate", "cocycle", "mirror", "santalo", "audit", "selftest")

DEFAULTS = {
    "orbit": {"x0": 0.0, "Phi0": 0.5, "bounces": 100},
    "conjugate": {"nx": 10, "nphi": 10, "bounces": 50, "window": 50},
    "cocycle": {"points": 8, "max_window": 256, "tol": COCYCLE_TOL},
    "mirror": {"x0": 0.0, "Phi0": 0.5, "bounces": 100},
    "santalo": {"grid": list(DEFAULT_GRID)},
    "audit": {"grid": list(DEFAULT_GRID), "tol": 1e-6},
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"invalid config field {field}: {message}")
        self.field = field


# --- configuration ---------------------------------------------------------


def _number(value, field, positive=False, integer=False, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(field, f"expected a number, got {value!r}") from None
    if not math.isfinite(v):
        raise ConfigError(field, "must be finite")
    if integer:
        if v != int(v):
            raise ConfigError(field, f"expected an integer, got {value!r}")
        v = int(v)
    if positive and v <= 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    if lo is not None and v < lo:
        raise ConfigError(field, f"must be at least {lo}, got {value!r}")
    if hi is not None and v > hi:
        raise ConfigError(field, f"must be at most {hi}, got {value!r}")
    return v


def parse_grid(text, field="grid"):
    if isinstance(text, str):
        parts = text.lower().split("x")
    else:
        parts = list(text) if isinstance(text, (list, tuple)) else [text]
    if len(parts) != 2:
        raise ConfigError(field, f"expected <nx>x<nphi>, got {text!r}")
    return [_number(p, field, integer=True, lo=16) for p in parts]


def _section(raw, name):
    sec = raw.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a mapping")
    out = dict(DEFAULTS.get(name, {}))
    unknown = set(sec) - set(out)
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}", "unknown field")
    out.update(sec)
    return out


def resolve_config(raw: dict, seed=None, grid=None) -> dict:
    """Validate a parsed YAML mapping and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    known = {"surface", "curve", "seed"} | set(DEFAULTS)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    if "surface" not in raw:
        raise ConfigError("surface", "missing (use -1, 0 or 1)")
    K = raw["surface"]
    if isinstance(K, bool) or K not in (-1, 0, 1):
        raise ConfigError("surface", f"must be -1, 0 or 1, got {K!r}")

    cur = raw.get("curve")
    if not isinstance(cur, dict):
        raise ConfigError("curve", "missing or not a mapping")
    unknown = set(cur) - {"c0", "radius", "harmonics", "center", "resolution"}
    if unknown:
        raise ConfigError(f"curve.{sorted(unknown)[0]}", "unknown field")
    if ("c0" in cur) == ("radius" in cur):
        raise ConfigError("curve.c0", "give exactly one of curve.c0 or curve.radius")
    key = "c0" if "c0" in cur else "radius"
    c0 = _number(cur[key], f"curve.{key}", positive=True)
    if K == 1 and c0 >= math.pi / 2:
        raise ConfigError(f"curve.{key}", f"must be below pi/2 on the sphere, got {c0!r}")
    harmonics = []
    if key == "radius" and cur.get("harmonics"):
        raise ConfigError("curve.harmonics", "a circle (curve.radius) takes no harmonics")
    for i, h in enumerate(cur.get("harmonics") or []):
        f = f"curve.harmonics[{i}]"
        if not isinstance(h, (list, tuple)) or len(h) != 3:
            raise ConfigError(f, "expected [order, a, b]")
        harmonics.append([_number(h[0], f, integer=True, lo=1), _number(h[1], f), _number(h[2], f)])
    center = cur.get("center")
    if center is not None:
        if not isinstance(center, (list, tuple)) or len(center) != 3:
            raise ConfigError("curve.center", "expected three embedding coordinates")
        center = [_number(c, "curve.center") for c in center]
    resolution = _number(cur.get("resolution", DEFAULT_RESOLUTION), "curve.resolution", integer=True, lo=16)

    cfg = {
        "surface": int(K),
        "curve": {"c0": c0, "harmonics": harmonics, "center": center, "resolution": resolution},
    }
    for name in DEFAULTS:
        cfg[name] = _section(raw, name)

    o = cfg["orbit"], cfg["mirror"]
    for name, sec in zip(("orbit", "mirror"), o):
        sec["x0"] = _number(sec["x0"], f"{name}.x0")
        sec["Phi0"] = _number(sec["Phi0"], f"{name}.Phi0")
        if not abs(sec["Phi0"]) < 1:
            raise ConfigError(f"{name}.Phi0", f"must lie in (-1, 1), got {sec['Phi0']!r}")
        sec["bounces"] = _number(sec["bounces"], f"{name}.bounces", integer=True, lo=2)
    c = cfg["conjugate"]
    for f in ("nx", "nphi", "bounces", "window"):
        c[f] = _number(c[f], f"conjugate.{f}", integer=True, lo=1)
    if c["window"] < 2:
        raise ConfigError("conjugate.window", "must be at least 2")
    h = cfg["cocycle"]
    h["points"] = _number(h["points"], "cocycle.points", integer=True, lo=1)
    h["max_window"] = _number(h["max_window"], "cocycle.max_window", integer=True, lo=8)
    h["tol"] = _number(h["tol"], "cocycle.tol", positive=True)
    cfg["audit"]["tol"] = _number(cfg["audit"]["tol"], "audit.tol", positive=True)
    for name in ("santalo", "audit"):
        cfg[name]["grid"] = parse_grid(grid if grid is not None else cfg[name]["grid"], "grid" if grid else f"{name}.grid")

    s = seed if seed is not None else raw.get("seed", 0)
    cfg["seed"] = _number(s, "seed", integer=True, lo=0, hi=2**64 - 1)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def curve_from_config(cfg: dict, require_convex=True, resolution=None):
    c = cfg["curve"]
    spec = CurveSpec(cfg["surface"], c["c0"], tuple(tuple(h) for h in c["harmonics"]), c["center"])
    return build_curve(spec, resolution or c["resolution"], require_convex=require_convex)


# --- output helpers --------------------------------------------------------


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_report(out: Path, subcommand: str, cfg: dict, results: dict, deltas: dict) -> Path:
    report = {
        "tool": "billiardlab",
        "version": __version__,
        "subcommand": subcommand,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "results": results,
        "doubling_deltas": deltas,
    }
    path = out / "report.json"
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _open_csv(out: Path, name: str):
    return open(out / name, "w", newline="")


def _pool_map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# --- subcommands -----------------------------------------------------------


def cmd_curve(cfg, out, threads):
    curve = curve_from_config(cfg, require_convex=False)
    fine = curve_from_config(cfg, require_convex=False, resolution=2 * curve.resolution)
    with _open_csv(out, "curve.csv") as fh:
        fh.write("theta,s,k,X,Y,Z\n")
        for th, s, k, p in zip(curve.theta, curve.s, curve.k, curve.points):
            fh.write(",".join(f"{v:.17g}" for v in (th, s, k, *p)) + "\n")
    results = {
        "P": curve.P,
        "A": curve.A,
        "gauss_bonnet_residual": gauss_bonnet_residual(curve),
        "min_k": curve.min_curvature,
        "convex": bool(curve.min_curvature > 0),
    }
    deltas = {"P": fine.P - curve.P, "A": fine.A - curve.A, "total_curvature": fine.total_curvature - curve.total_curvature}
    return results, deltas


def cmd_orbit(cfg, out, threads):
    curve = curve_from_config(cfg)
    o = cfg["orbit"]
    config = orbit(curve, PhasePoint(o["x0"], o["Phi0"]), o["bounces"])
    with _open_csv(out, "orbit.csv") as fh:
        write_orbit_csv(config, fh)
    results = {
        "bounces": config.n,
        "max_reflection_defect": float(np.max(np.abs(config.reflection_defect()))),
        "max_euler_lagrange_residual": float(np.max(np.abs(config.euler_lagrange_residual()))),
    }
    return results, {}


def _phase_grid(curve, nx, nphi):
    x = np.arange(nx) * (curve.P / nx)
    Phi = np.cos(np.pi * (np.arange(nphi) + 0.5) / nphi)
    X, F = np.meshgrid(x, Phi, indexing="ij")
    return X.ravel(), F.ravel()


def cmd_conjugate(cfg, out, threads):
    curve = curve_from_config(cfg)
    c = cfg["conjugate"]
    x0, Phi0 = _phase_grid(curve, c["nx"], c["nphi"])
    configs = orbit_batch(curve, x0, Phi0, c["bounces"])
    rows = scan_windows(configs, c["window"])
    with _open_csv(out, "conjugate.csv") as fh:
        write_scan_csv(rows, fh)
    n_conj = sum(r.verdict == "conjugate" for r in rows)
    results = {
        "orbits": len(configs),
        "windows": len(rows),
        "conjugate_windows": n_conj,
        "orbits_with_conjugate_points": len({r.orbit_id for r in rows if r.verdict == "conjugate"}),
    }
    return results, {}


def cmd_cocycle(cfg, out, threads):
    curve = curve_from_config(cfg)
    h = cfg["cocycle"]
    rng = np.random.default_rng(cfg["seed"])
    xs = rng.uniform(0, curve.P, h["points"])
    Phis = rng.uniform(-0.95, 0.95, h["points"])
    configs = orbit_batch(curve, xs, Phis, h["max_window"])

    def one(i):
        p = PhasePoint(float(xs[i]), float(Phis[i]))
        try:
            est = hopf_cocycle(curve, p, h["max_window"], h["tol"], config=configs[i])
        except ConjugatePointsFound as exc:
            return (i, p, float("nan"), exc.window, False, "conjugate", float("nan"))
        last = est.history[-1][2] if est.history and est.history[-1][2] is not None else float("nan")
        prev = est.history[-2][2] if len(est.history) > 1 and est.history[-2][2] is not None else float("nan")
        status = "converged" if est.converged else "not-converged"
        return (i, p, est.nu1, est.window, est.converged, status, last - prev)

    rows = _pool_map(one, range(h["points"]), threads)
    with _open_csv(out, "cocycle.csv") as fh:
        fh.write("point,x,Phi,nu1,window,status,cauchy_delta\n")
        for i, p, nu, N, _, status, d in rows:
            fh.write(f"{i},{p.x:.17g},{p.Phi:.17g},{nu:.17g},{N},{status},{d:.17g}\n")
    results = {
        "points": len(rows),
        "converged": sum(r[4] for r in rows),
        "conjugate": sum(r[5] == "conjugate" for r in rows),
    }
    deltas = {f"nu1[{r[0]}]": r[6] for r in rows}
    return results, deltas


def cmd_mirror(cfg, out, threads):
    curve = curve_from_config(cfg)
    m = cfg["mirror"]
    config = orbit(curve, PhasePoint(m["x0"], m["Phi0"]), m["bounces"])
    nu = window_cocycle(config)
    half = window_cocycle(config, config.n // 2)
    res = mirror_residual(curve, config, nu)
    nu_full = np.concatenate([nu, np.full(config.n - nu.size, np.nan)])
    a = caustic_distances(config.chords.L, config.chords.phi, config.chords.psi, np.where(np.isfinite(nu_full), nu_full, 1.0), curve.K)
    a[~np.isfinite(nu_full)] = np.nan
    with _open_csv(out, "mirror.csv") as fh:
        write_residual_csv(a[1:], config.chords.L[1:], res, fh)
    finite = res[np.isfinite(res)]
    results = {
        "bounces": config.n,
        "evaluated": int(finite.size),
        "max_abs_residual": float(np.max(np.abs(finite))) if finite.size else None,
    }
    # truncation of the boundary-value window: compare nu over the shared first quarter
    q = max(1, config.n // 4)
    deltas = {"nu1_window_halving_max": float(np.max(np.abs(nu[:q] - half[:q])))}
    return results, deltas


def cmd_santalo(cfg, out, threads):
    curve = curve_from_config(cfg)
    grid = tuple(cfg["santalo"]["grid"])
    q = santalo_quadrature(curve, grid, doubling=True, workers=threads)
    target = 2 * np.pi * curve.A
    results = {
        "grid": list(grid),
        "integral": q.value,
        "two_pi_A": target,
        "relative_residual": (q.value - target) / target,
    }
    return results, {"santalo": q.delta}


def cmd_audit(cfg, out, threads):
    curve = curve_from_config(cfg)
    a = cfg["audit"]
    report = rigidity_audit(curve, tuple(a["grid"]), a["tol"], doubling=True, workers=threads)
    with _open_csv(out, "audit.csv") as fh:
        fh.write(AUDIT_CSV_HEADER)
        fh.write(report.csv_line())
    deltas = {"santalo": report.santalo_delta}
    if report.horocycle_ok and curve.K != 0:
        fine = curve_from_config(cfg, resolution=2 * curve.resolution)
        deltas["rigidity_I"] = rigidity_integral(fine) - report.rigidity_I
    return report.to_dict(), deltas


def cmd_selftest(out, echo):
    checks = run_all(echo=echo)
    with _open_csv(out, "selftest.csv") as fh:
        fh.write("criterion,name,passed,gating,seconds,detail\n")
        for c in checks:
            detail = c.detail.replace('"', "'")
            fh.write(f'{c.criterion},"{c.name}",{int(c.passed)},{int(c.gating)},{c.seconds:.3f},"{detail}"\n')
    failed = [c for c in checks if c.gating and not c.passed]
    return checks, failed


COMMANDS = {
    "curve": cmd_curve,
    "orbit": cmd_orbit,
    "conjugate": cmd_conjugate,
    "cocycle": cmd_cocycle,
    "mirror": cmd_mirror,
    "santalo": cmd_santalo,
    "audit": cmd_audit,
}


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, default=None, help="random seed, overrides the config")
    common.add_argument("--grid", default=None, help="phase quadrature grid <nx>x<nphi>, overrides the config")
    parser = argparse.ArgumentParser(prog="billiardlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"billiardlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    helps = {
        "curve": "build a curve, check Gauss-Bonnet, dump the curvature table",
        "orbit": "dump one billiard orbit",
        "conjugate": "conjugate-point sweep over a phase grid",
        "cocycle": "Hopf cocycle estimates at random phase points",
        "mirror": "mirror-equation residuals along an orbit",
        "santalo": "phase-space quadrature of the chord length",
        "audit": "full rigidity audit",
        "selftest": "run the acceptance suite",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _threads(arg) -> int:
    if arg is not None:
        n = arg
        field = "--threads"
    else:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        field = THREADS_ENV
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(field, f"expected a positive integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(field, f"must be positive, got {n}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        threads = _threads(args.threads)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.subcommand == "selftest":
            checks, failed = cmd_selftest(args.out, echo=print)
            print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
            if failed:
                for c in failed:
                    print(f"failed: criterion {c.criterion}: {c.name}: {c.detail}", file=err)
                return EXIT_NUMERICAL
            return EXIT_OK
        if args.config is None:
            raise ConfigError("--config", "required for this subcommand")
        try:
            with open(args.config) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"not valid YAML: {exc}") from None
        grid = parse_grid(args.grid, "--grid") if args.grid is not None else None
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = resolve_config(raw or {}, args.seed, grid)
        try:
            results, deltas = COMMANDS[args.subcommand](cfg, args.out, threads)
        except CurveError as exc:
            raise ConfigError("curve", str(exc)) from None
        path = write_report(args.out, args.subcommand, cfg, results, deltas)
        print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"billiardlab: {exc}", file=err)
        return EXIT_INVALID
    except (BilliardError, ConjugatePointsFound, HorocycleConvexityError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"billiardlab: numerical failure: {type(exc).__name__}: {exc}", file=err)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
