"""Classical RK4 time stepping with a stiffness-aware fixed step."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

from crossdiff.errors import DivisionByVanishingDenominator, NegativityBreach, NonFiniteState
from crossdiff.grid_ops import Grid
from crossdiff.models import RHS, DimensionalParams, ModelKind, ModelRHS, Params, SystemState

logger = logging.getLogger(__name__)

DEFAULT_SNAPSHOTS = 200
# steps shorter than this fraction of dt are merged into the previous one
SLIVER = 1e-9

Observer = Callable[[float, SystemState], None]


class StepPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    cfl_safety: float = Field(default=0.4, gt=0.0, le=1.0)
    relax_safety: float = Field(default=0.2, gt=0.0, le=1.0)
    dt_max: PositiveFloat = 1e-2
    t_end: PositiveFloat = 1.0
    snapshots: int = Field(default=DEFAULT_SNAPSHOTS, ge=2)

    def snapshot_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.snapshots)


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    snapshots: List[SystemState] = field(default_factory=list)
    steps: int = 0
    retries: int = 0

    @property
    def final(self) -> SystemState:
        return self.snapshots[-1]

    def series(self, name: str) -> np.ndarray:
        """Stack one species over all snapshots"""
        return np.stack([s.field(name) for s in self.snapshots])


def _relaxation_rates(p: DimensionalParams, kind: ModelKind, st: Optional[SystemState]) -> Tuple[float, float]:
    """Coefficients multiplying 1/eps and 1/delta in the fast brackets, sup over st when given"""
    if st is None:
        return max(1.0, p.eta_tilde), max(1.0, p.gamma_tilde)
    if kind is ModelKind.MICRO5:
        P, Ms, Mh, Ts, Th = st.values
        top = Ts + Th
    else:
        P, Ms, Mh, top = st.values
    eps_rate = p.eta_tilde + p.beta_tilde * float(np.max(Ms + Mh))
    delta_rate = p.gamma_tilde + p.alpha_tilde * float(np.max(P / (1.0 + p.c_tilde * np.maximum(top, 0.0))))
    return max(1.0, eps_rate), max(1.0, delta_rate)


def stable_dt(p: Params, g: Grid, kind: ModelKind, policy: StepPolicy, st: Optional[SystemState] = None) -> float:
    """
    Largest RK4 step honouring diffusion CFL and the 1/eps, 1/delta relaxations.

    Without a state the relaxation rates are bounded by parameters alone. With
    one, the brackets' linear rates (eta + beta M) / eps and
    (gamma + alpha P / (1 + c T)) / delta are taken at their sup over the grid.
    """
    kind = ModelKind(kind)
    candidates = [policy.dt_max, policy.cfl_safety * g.h_min ** 2 / (2 * g.dim * p.max_diffusivity)]
    if isinstance(p, DimensionalParams) and kind in (ModelKind.MICRO5, ModelKind.MESO4):
        eps_rate, delta_rate = _relaxation_rates(p, kind, st)
        if kind is ModelKind.MICRO5:
            candidates.append(policy.relax_safety * p.epsilon / eps_rate)
        candidates.append(policy.relax_safety * p.delta / delta_rate)
    return min(candidates)


def rk4_step(rhs: RHS, st: SystemState, dt: float) -> np.ndarray:
    k1 = rhs(st).values
    k2 = rhs(st.with_values(st.values + 0.5 * dt * k1)).values
    k3 = rhs(st.with_values(st.values + 0.5 * dt * k2)).values
    k4 = rhs(st.with_values(st.values + dt * k3)).values
    return st.values + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _admissible(values: np.ndarray, t: float, tol: float) -> Optional[float]:
    """Return the minimum if it breaches -tol, None otherwise"""
    if not np.all(np.isfinite(values)):
        raise NonFiniteState(t)
    lowest = float(np.min(values))
    return lowest if lowest < -tol else None


def _attempt(rhs: RHS, st: SystemState, h: float, t: float, tol: float) -> Tuple[Optional[np.ndarray], Optional[Exception]]:
    """RK4 values for one step, or the reason the step is not admissible"""
    try:
        values = rk4_step(rhs, st, h)
    except DivisionByVanishingDenominator as exc:
        # an intermediate stage crossed zero
        return None, exc
    lowest = _admissible(values, t + h, tol)
    if lowest is not None:
        return None, NegativityBreach("state left the nonnegative cone", t + h, lowest)
    return values, None


def integrate(rhs: RHS, st0: SystemState, policy: StepPolicy, *,
              dt: Optional[float] = None,
              observers: Sequence[Observer] = (),
              step_observers: Sequence[Observer] = ()) -> Trajectory:
    """
    Advance st0 to policy.t_end.

    The step comes from stable_dt at the current state unless given
    explicitly (required when rhs is not a ModelRHS). Steps are shortened to
    land exactly on snapshot times. A step that leaves the nonnegative cone,
    or whose intermediate stage hits a vanishing denominator, is retried once
    at half size before the error is raised; values are never clipped.
    """
    adaptive = dt is None
    if adaptive and not isinstance(rhs, ModelRHS):
        raise TypeError("dt is required for a plain callable right-hand side")
    targets = policy.snapshot_times()
    tol = st0.negativity_tolerance
    lowest = _admissible(st0.values, 0.0, tol)
    if lowest is not None:
        raise NegativityBreach("initial state is negative", 0.0, lowest)

    traj = Trajectory(times=[0.0], snapshots=[st0])
    for obs in list(observers) + list(step_observers):
        obs(0.0, st0)

    t = 0.0
    st = st0
    for target in targets[1:]:
        target = float(target)
        while t < target:
            if adaptive:
                dt = stable_dt(rhs.params, rhs.grid, rhs.kind, policy, st)
            h = min(dt, target - t)
            if target - (t + h) < SLIVER * dt:
                h = target - t
            values, failure = _attempt(rhs, st, h, t, tol)
            if failure is not None:
                h *= 0.5
                traj.retries += 1
                logger.debug("step at t=%.6g failed (%s), retrying with dt=%.3g", t, failure, h)
                values, failure = _attempt(rhs, st, h, t, tol)
                if failure is not None:
                    raise failure
            t = target if h == target - t else t + h
            st = st.with_values(values)
            traj.steps += 1
            for obs in step_observers:
                obs(t, st)
        traj.times.append(t)
        traj.snapshots.append(st)
        for obs in observers:
            obs(t, st)

    logger.debug("integrated %s to t=%g in %d steps (%d retries)",
                 getattr(rhs, "kind", "rhs"), t, traj.steps, traj.retries)
    return traj


def prey_growth_ratio(traj: Trajectory, r_tilde: float, name: str = "P") -> float:
    """max_t ||P(t)||_inf / (exp(r t) ||P_in||_inf); at most 1 by the maximum principle"""
    p_in = float(np.max(np.abs(traj.snapshots[0].field(name))))
    if p_in == 0.0:
        return 0.0
    return max(
        float(np.max(np.abs(s.field(name)))) / (math.exp(r_tilde * t) * p_in)
        for t, s in zip(traj.times, traj.snapshots)
    )
