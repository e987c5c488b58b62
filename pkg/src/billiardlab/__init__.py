"""Convex billiards on surfaces of constant curvature: a numerical rigidity lab."""

from .billiard import Configuration, PhasePoint, billiard_step, chord, orbit, orbit_batch
from .curve import BoundaryCurve, CurveError, CurveSpec, build_curve, circle_spec
from .integralgeom import rigidity_audit, rigidity_integral, santalo_quadrature
from .mirror import mirror_residual, solve_caustic_distance
from .surface import CurvatureTag, SurfacePoint, TangentVector, geodesic_distance
from .variational import conjugate_point_test, hopf_cocycle, jacobi_coefficients, second_variation_definiteness

__version__ = "0.1.0"

__all__ = [
    "BoundaryCurve",
    "Configuration",
    "CurvatureTag",
    "CurveError",
    "CurveSpec",
    "PhasePoint",
    "SurfacePoint",
    "TangentVector",
    "billiard_step",
    "build_curve",
    "chord",
    "circle_spec",
    "conjugate_point_test",
    "geodesic_distance",
    "hopf_cocycle",
    "jacobi_coefficients",
    "mirror_residual",
    "orbit",
    "orbit_batch",
    "rigidity_audit",
    "rigidity_integral",
    "santalo_quadrature",
    "second_variation_definiteness",
    "solve_caustic_distance",
    "__version__",
]
