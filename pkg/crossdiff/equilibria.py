"""
Homogeneous equilibria of the rescaled macro3 system.

The boundary equilibrium E1 (no top-predator) is closed-form. The interior
equilibrium E* is found numerically: the third equation forces w = v, the
first gives v as a function of u, and the second leaves a scalar residual
F(u) whose sign changes are bracketed on a fixed sample and bisected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from crossdiff.errors import DegenerateDenominator, NoInteriorEquilibrium, UncertifiedEquilibrium
from crossdiff.models import DimensionlessParams

logger = logging.getLogger(__name__)

Triple = Tuple[float, float, float]

SCAN_SAMPLES = 2048
BISECTION_XTOL = 1e-14
NEWTON_STEPS = 3
RESIDUAL_TOL = 1e-10
DEGENERATE_TOL = 1e-12
EDGE_SAMPLES = 32
EDGE_DEPTH = 1e-6
ORACLE_SAMPLES = 10**6


@dataclass
class EquilibriumReport:
    e1: Optional[Triple]
    e1_exists_condition: bool
    estar: Optional[Triple]
    estar_residual: Optional[np.ndarray]
    bracket_count: int
    roots: List[float] = field(default_factory=list)


def boundary_equilibrium(p: DimensionlessParams) -> Optional[Triple]:
    """E1 = (db/(1-d), b(1-d-db)/(1-d)^2, 0) when d + db < 1"""
    if not p.d + p.d * p.b < 1.0:
        return None
    one_minus_d = 1.0 - p.d
    return (p.d * p.b / one_minus_d, p.b * (one_minus_d - p.d * p.b) / one_minus_d ** 2, 0.0)


def equilibrium_residual(p: DimensionlessParams, pt: Triple) -> np.ndarray:
    """The three reaction terms of the rescaled system at a homogeneous point"""
    u, v, w = (float(x) for x in pt)
    if v == 0.0:
        raise ZeroDivisionError("equilibrium residual needs v > 0")
    holling = 1.0 / (p.b + u + p.c * w)
    return np.array([
        u * (1.0 - u - v * holling),
        p.q * v * (u * holling - p.d - p.e * w / (p.n + v)),
        w * p.s * (1.0 - w / v),
    ])


def admissible_interval(p: DimensionlessParams) -> Tuple[float, float]:
    """u-range where 1 - c(1 - u) > 0, intersected with (0, 1)"""
    lower = 0.0 if p.c <= 1.0 else 1.0 - 1.0 / p.c
    return lower, 1.0


def meso_level(p: DimensionlessParams, u):
    """v(u) from the prey equation with w = v"""
    return (1.0 - u) * (p.b + u) / (1.0 - p.c * (1.0 - u))


def reduced_residual(p: DimensionlessParams, u):
    v = meso_level(p, u)
    return u / (p.b + u + p.c * v) - p.d - p.e * v / (p.n + v)


def reduced_residual_prime(p: DimensionlessParams, u: float) -> float:
    denom = 1.0 - p.c * (1.0 - u)
    v = meso_level(p, u)
    dv = ((1.0 - 2.0 * u - p.b) * denom - p.c * (1.0 - u) * (p.b + u)) / denom ** 2
    big = p.b + u + p.c * v
    return (big - u * (1.0 + p.c * dv)) / big ** 2 - p.e * p.n * dv / (p.n + v) ** 2


def _samples(p: DimensionlessParams, count: int) -> np.ndarray:
    lower, upper = admissible_interval(p)
    uniform = np.linspace(lower, upper, count + 2)[1:-1]
    # roots near u = 0 appear when b and d are both small; refine the end cells geometrically
    width = uniform[0] - lower
    edge = np.geomspace(EDGE_DEPTH * width, width, EDGE_SAMPLES, endpoint=False)
    return np.unique(np.concatenate([lower + edge, uniform, upper - edge]))


def _brackets(p: DimensionlessParams, count: int) -> List[Tuple[float, float]]:
    u = _samples(p, count)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = meso_level(p, u)
        f = reduced_residual(p, u)
    ok = np.isfinite(f) & (v > 0.0)
    u, f = u[ok], f[ok]
    flips = np.nonzero(np.signbit(f[:-1]) != np.signbit(f[1:]))[0]
    return [(float(u[i]), float(u[i + 1])) for i in flips]


def count_sign_changes(p: DimensionlessParams, samples: int = SCAN_SAMPLES) -> int:
    return len(_brackets(p, samples))


def resolution_check(p: DimensionlessParams, oracle_samples: int = ORACLE_SAMPLES) -> Tuple[int, int]:
    """Sign changes at the working density and at a brute-force density; a mismatch is logged"""
    coarse = count_sign_changes(p, SCAN_SAMPLES)
    fine = count_sign_changes(p, oracle_samples)
    if coarse != fine:
        logger.warning("scan resolution: %d sign changes at %d samples, %d at %d",
                       coarse, SCAN_SAMPLES, fine, oracle_samples)
    return coarse, fine


def _polish(p: DimensionlessParams, root: float, lo: float, hi: float) -> float:
    best, best_f = root, abs(reduced_residual(p, root))
    x = root
    for _ in range(NEWTON_STEPS):
        slope = reduced_residual_prime(p, x)
        if slope == 0.0 or not np.isfinite(slope):
            break
        x = x - reduced_residual(p, x) / slope
        if not lo <= x <= hi:
            break
        fx = abs(reduced_residual(p, x))
        if fx < best_f:
            best, best_f = x, fx
    return best


def _roots(p: DimensionlessParams) -> List[float]:
    roots = []
    for lo, hi in _brackets(p, SCAN_SAMPLES):
        root = optimize.bisect(lambda x: reduced_residual(p, x), lo, hi, xtol=BISECTION_XTOL, maxiter=200)
        roots.append(_polish(p, root, lo, hi))
    return roots


def interior_equilibrium(p: DimensionlessParams) -> Optional[Triple]:
    """Smallest-u coexistence equilibrium (u*, v*, v*), residual-certified"""
    report = equilibrium_report(p, require_interior=True)
    return report.estar


def _certify(p: DimensionlessParams, u: float) -> Tuple[Triple, np.ndarray]:
    if abs(1.0 - p.c * (1.0 - u)) < DEGENERATE_TOL:
        raise DegenerateDenominator(f"1 - c(1 - u) vanishes at u={u:.17g}")
    v = float(meso_level(p, u))
    point = (u, v, v)
    residual = equilibrium_residual(p, point)
    if not np.max(np.abs(residual)) < RESIDUAL_TOL:
        raise UncertifiedEquilibrium(
            f"residual {np.max(np.abs(residual)):.3g} at u={u:.17g} exceeds {RESIDUAL_TOL:g}")
    return point, residual


def equilibrium_report(p: DimensionlessParams, require_interior: bool = False) -> EquilibriumReport:
    e1 = boundary_equilibrium(p)
    roots = _roots(p)
    if len(roots) > 1:
        logger.info("%d interior equilibria bracketed; returning the smallest u", len(roots))
    estar = residual = None
    if roots:
        estar, residual = _certify(p, min(roots))
    elif require_interior:
        raise NoInteriorEquilibrium("reduced residual has no sign change on the admissible interval")
    return EquilibriumReport(
        e1=e1,
        e1_exists_condition=p.d + p.d * p.b < 1.0,
        estar=estar,
        estar_residual=residual,
        bracket_count=len(roots),
        roots=sorted(roots),
    )
