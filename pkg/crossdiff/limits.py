"""
Fast-reaction limit harnesses.

The eps sweep integrates micro5 for a decreasing list of eps and compares the
aggregated state with one meso4 run; the delta sweep does the same for meso4
against macro3. Each run also records the time-integrated L1 norm of the
algebraic constraint that the relaxation drives to zero.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum, unique
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from crossdiff.errors import ConfigValidationError, FitError, NumericalError, SweepError
from crossdiff.grid_ops import Grid, l1_norm, l2_norm
from crossdiff.integrator import StepPolicy, Trajectory, integrate, prey_growth_ratio
from crossdiff.models import DimensionalParams, ModelKind, PreyUptake, SystemState, aggregate, make_rhs

logger = logging.getLogger(__name__)

DEFAULT_EPS_LIST = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
DEFAULT_DELTA_LIST = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


@unique
class Knob(StrEnum):
    EPSILON = "eps"
    DELTA = "delta"

    @property
    def param(self) -> str:
        return "epsilon" if self is Knob.EPSILON else "delta"


@dataclass
class ConvergenceTable:
    knob: Knob
    values: List[float]
    constraint_l1: List[float]
    state_gap: List[float]
    fitted_order_constraint: Optional[float] = None
    fitted_order_gap: Optional[float] = None
    # min over time and space of min(Ms, Mh)
    floor_min: List[float] = field(default_factory=list)
    # space-time L2 norms of the two split species of the fast system
    split_l2: List[Tuple[float, float]] = field(default_factory=list)
    growth_ratio: List[float] = field(default_factory=list)

    def rows(self) -> Iterator[Tuple[float, float, float]]:
        yield from zip(self.values, self.constraint_l1, self.state_gap)


def constraint_residual_eps(st: SystemState, p: DimensionalParams, g: Grid) -> float:
    """L1 norm of eta Th - beta (Ms + Mh) Ts"""
    _, Ms, Mh, Ts, Th = st.values
    return l1_norm(p.eta_tilde * Th - p.beta_tilde * (Ms + Mh) * Ts, g)


def constraint_residual_delta(st: SystemState, p: DimensionalParams, g: Grid) -> float:
    """L1 norm of alpha P Ms / (1 + c T) - gamma Mh"""
    P, Ms, Mh, T = st.values
    return l1_norm(p.alpha_tilde * P * Ms / (1.0 + p.c_tilde * T) - p.gamma_tilde * Mh, g)


def fit_order(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(ys) against log(xs)"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise FitError(f"xs and ys differ in length ({xs.size} vs {ys.size})")
    if np.any(xs <= 0.0) or np.any(np.diff(xs) >= 0.0):
        raise FitError("xs must be positive and strictly decreasing")
    if np.any(ys < 0.0):
        raise FitError("ys must be nonnegative")
    keep = ys > 0.0
    if not np.all(keep):
        logger.warning("dropping %d zero values from the order fit", int(np.count_nonzero(~keep)))
    if np.count_nonzero(keep) < 2:
        raise FitError("need at least 2 positive points to fit an order")
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(slope)


class _TimeIntegral:
    """Trapezoid rule over the accepted steps of an integration"""

    def __init__(self, fn: Callable[[SystemState], float]):
        self.fn = fn
        self.total = 0.0
        self._last: Optional[Tuple[float, float]] = None

    def __call__(self, t: float, st: SystemState) -> None:
        value = self.fn(st)
        if self._last is not None:
            t0, v0 = self._last
            self.total += 0.5 * (t - t0) * (v0 + value)
        self._last = (t, value)


class _RunningMin:
    def __init__(self, fn: Callable[[SystemState], float]):
        self.fn = fn
        self.value = float("inf")

    def __call__(self, t: float, st: SystemState) -> None:
        self.value = min(self.value, self.fn(st))


@dataclass
class _Run:
    constraint_l1: float
    state_gap: float
    floor_min: float
    split_l2: Tuple[float, float]
    growth_ratio: float


def _check_values(knob: Knob, values: Sequence[float]) -> List[float]:
    values = [float(v) for v in values]
    key = f"{knob.value}_list"
    if not values:
        raise ConfigValidationError(key, "must not be empty")
    if any(not v > 0.0 for v in values):
        raise ConfigValidationError(key, "values must be positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigValidationError(key, "values must be strictly decreasing")
    return values


def _state_gap(fast: Trajectory, reference: Trajectory, kind: ModelKind) -> float:
    """sup over snapshots of the L2 distance between aggregated fast and reference states"""
    gap = 0.0
    for st, ref in zip(fast.snapshots, reference.snapshots):
        diff = aggregate(st, kind).values - ref.values
        gap = max(gap, float(np.sqrt(np.sum(diff * diff) * st.grid.cell_volume)))
    return gap


def _species_norm(name: str, g: Grid) -> Callable[[SystemState], float]:
    return lambda st: l2_norm(st.field(name), g) ** 2


def _run_fast(knob: Knob, value: float, p: DimensionalParams, ic: SystemState, policy: StepPolicy,
              reference: Trajectory, prey_uptake: PreyUptake) -> _Run:
    g = ic.grid
    pv = p.model_copy(update={knob.param: value})
    if knob is Knob.EPSILON:
        kind, limit_kind, split = ModelKind.MICRO5, ModelKind.MESO4, ("Ts", "Th")
        residual = _TimeIntegral(lambda st: constraint_residual_eps(st, pv, g))
    else:
        kind, limit_kind, split = ModelKind.MESO4, ModelKind.MACRO3, ("Ms", "Mh")
        residual = _TimeIntegral(lambda st: constraint_residual_delta(st, pv, g))
    norms = [_TimeIntegral(_species_norm(name, g)) for name in split]
    floor = _RunningMin(lambda st: float(min(st.field("Ms").min(), st.field("Mh").min())))

    rhs = make_rhs(kind, pv, g, prey_uptake)
    try:
        traj = integrate(rhs, ic, policy, step_observers=[residual, floor, *norms])
    except NumericalError as exc:
        if isinstance(exc, SweepError):
            raise
        raise SweepError(knob.value, value, exc) from exc
    run = _Run(
        constraint_l1=residual.total,
        state_gap=_state_gap(traj, reference, limit_kind),
        floor_min=floor.value,
        split_l2=(float(np.sqrt(norms[0].total)), float(np.sqrt(norms[1].total))),
        growth_ratio=prey_growth_ratio(traj, pv.r_tilde),
    )
    logger.info("%s=%g: constraint %.6g, gap %.6g, %d steps",
                knob.value, value, run.constraint_l1, run.state_gap, traj.steps)
    return run


def _fit_or_none(xs: List[float], ys: List[float], what: str) -> Optional[float]:
    if len(xs) < 2:
        return None
    try:
        return fit_order(xs, ys)
    except FitError as exc:
        logger.warning("no %s order: %s", what, exc)
        return None


def _sweep(knob: Knob, p: DimensionalParams, values: Sequence[float], ic: SystemState,
           policy: StepPolicy, reference_kind: ModelKind, prey_uptake: PreyUptake,
           max_workers: int) -> ConvergenceTable:
    values = _check_values(knob, values)
    reference_ic = aggregate(ic, reference_kind)
    try:
        reference = integrate(make_rhs(reference_kind, p, ic.grid, prey_uptake), reference_ic, policy)
    except NumericalError as exc:
        raise SweepError(f"{reference_kind} reference", float("nan"), exc) from exc

    def one(value: float) -> _Run:
        return _run_fast(knob, value, p, ic, policy, reference, prey_uptake)

    if max_workers > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(one, values))
    else:
        runs = [one(v) for v in values]

    table = ConvergenceTable(
        knob=knob,
        values=values,
        constraint_l1=[r.constraint_l1 for r in runs],
        state_gap=[r.state_gap for r in runs],
        floor_min=[r.floor_min for r in runs],
        split_l2=[r.split_l2 for r in runs],
        growth_ratio=[r.growth_ratio for r in runs],
    )
    table.fitted_order_constraint = _fit_or_none(values, table.constraint_l1, "constraint")
    table.fitted_order_gap = _fit_or_none(values, table.state_gap, "state gap")
    return table


def run_epsilon_sweep(p: DimensionalParams, eps_list: Sequence[float], ic: SystemState, policy: StepPolicy,
                      max_workers: int = 1) -> ConvergenceTable:
    """micro5 against meso4 started from (P, Ms, Mh, Ts + Th)"""
    if ic.kind is not ModelKind.MICRO5:
        raise ValueError(f"eps sweep needs a micro5 initial state, got {ic.kind}")
    return _sweep(Knob.EPSILON, p, eps_list, ic, policy, ModelKind.MESO4, PreyUptake.SEARCHING, max_workers)


def run_delta_sweep(p: DimensionalParams, delta_list: Sequence[float], ic: SystemState, policy: StepPolicy,
                    max_workers: int = 1, prey_uptake: PreyUptake = PreyUptake.SEARCHING) -> ConvergenceTable:
    """meso4 against macro3 started from (P, Ms + Mh, T); the limit is formal, results are reported only"""
    if ic.kind is not ModelKind.MESO4:
        raise ValueError(f"delta sweep needs a meso4 initial state, got {ic.kind}")
    return _sweep(Knob.DELTA, p, delta_list, ic, policy, ModelKind.MACRO3, prey_uptake, max_workers)
