"""
Parameter universes and method-of-lines right-hand sides of the three-level
predator-prey food chain.

Four systems share one state container:

    micro5          P, Ms, Mh, Ts, Th   searching/handling split of both predators
    meso4           P, Ms, Mh, T        top-predator switch relaxed (eps -> 0)
    macro3          P, M, T             both switches relaxed, two cross-diffusions
    macro3_dimless  u, v, w             macro3 after rescaling

Every right-hand side is reaction + diffusion, and both parts are available
separately through ``ModelRHS``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum, unique
from typing import Callable, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat

from crossdiff.errors import DivisionByVanishingDenominator, GridError
from crossdiff.grid_ops import Field, Grid, build_grid, cross_diffusion, laplacian

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-14
NEGATIVITY_RTOL = 1e-10


@unique
class ModelKind(StrEnum):
    MICRO5 = "micro5"
    MESO4 = "meso4"
    MACRO3 = "macro3"
    MACRO3_DIMLESS = "macro3_dimless"

    @property
    def species(self) -> Tuple[str, ...]:
        return SPECIES[self]

    @property
    def dimensionless(self) -> bool:
        return self is ModelKind.MACRO3_DIMLESS


SPECIES: Dict[ModelKind, Tuple[str, ...]] = {
    ModelKind.MICRO5: ("P", "Ms", "Mh", "Ts", "Th"),
    ModelKind.MESO4: ("P", "Ms", "Mh", "T"),
    ModelKind.MACRO3: ("P", "M", "T"),
    ModelKind.MACRO3_DIMLESS: ("u", "v", "w"),
}


@unique
class PreyUptake(StrEnum):
    """Prey loss term of the meso4 system.

    SEARCHING is the eps -> 0 limit of micro5 (only searching meso-predators
    catch prey). SATURATED is the Holling form written with the total
    meso-predator density; it agrees with SEARCHING only on the delta
    constraint manifold.
    """

    SEARCHING = "searching"
    SATURATED = "saturated"


class DimensionalParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    r_tilde: PositiveFloat
    K: PositiveFloat
    alpha_tilde: PositiveFloat
    c_tilde: PositiveFloat
    gamma_tilde: PositiveFloat
    Gamma: PositiveFloat
    mu_tilde: PositiveFloat
    beta_tilde: PositiveFloat
    eta_tilde: PositiveFloat
    s_tilde: PositiveFloat
    m_tilde: PositiveFloat
    delta: PositiveFloat
    epsilon: PositiveFloat
    d1: PositiveFloat
    d2_1: PositiveFloat
    d2_2: PositiveFloat
    d3_1: PositiveFloat
    d3_2: PositiveFloat

    @property
    def max_diffusivity(self) -> float:
        return max(self.d1, self.d2_1, self.d2_2, self.d3_1, self.d3_2)


class DimensionlessParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    b: PositiveFloat
    n: PositiveFloat
    q: PositiveFloat
    s: PositiveFloat
    d: PositiveFloat
    e: PositiveFloat
    c: PositiveFloat
    D1: PositiveFloat
    D2_1: PositiveFloat
    D2_2: PositiveFloat
    D3_1: PositiveFloat
    D3_2: PositiveFloat

    @property
    def max_diffusivity(self) -> float:
        return max(self.D1, self.D2_1, self.D2_2, self.D3_1, self.D3_2)


Params = DimensionalParams | DimensionlessParams


def nondimensionalize(p: DimensionalParams, L: float) -> DimensionlessParams:
    """Map dimensional parameters to the rescaled system; L is the domain diameter"""
    if not L > 0.0:
        raise ValueError(f"domain diameter must be positive, got {L}")
    diff = p.r_tilde * L * L
    return DimensionlessParams(
        b=p.gamma_tilde / (p.alpha_tilde * p.K),
        n=p.eta_tilde * p.gamma_tilde / (p.beta_tilde * p.r_tilde * p.K),
        q=p.Gamma / p.r_tilde,
        s=p.s_tilde / p.r_tilde,
        d=p.mu_tilde / p.Gamma,
        e=p.m_tilde * p.eta_tilde / p.Gamma,
        c=p.c_tilde * p.m_tilde * p.r_tilde / p.alpha_tilde,
        D1=p.d1 / diff,
        D2_1=p.d2_1 / diff,
        D2_2=p.d2_2 / diff,
        D3_1=p.d3_1 / diff,
        D3_2=p.d3_2 / diff,
    )


def species_scales(p: DimensionalParams) -> Tuple[float, float, float]:
    """(P, M, T) per unit of (u, v, w)"""
    m_scale = p.K * p.r_tilde / p.gamma_tilde
    return p.K, m_scale, p.m_tilde * m_scale


def redimensionalize(p: DimensionalParams, point: Tuple[float, float, float]) -> Tuple[float, float, float]:
    su, sv, sw = species_scales(p)
    u, v, w = point
    return u * su, v * sv, w * sw


def domain_diameter(g: Grid) -> float:
    return float(np.sqrt(sum(length * length for length in g.lengths)))


@dataclass(frozen=True)
class SystemState:
    kind: ModelKind
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        expected = (len(self.kind.species),) + self.grid.shape
        if self.values.shape != expected:
            raise GridError(f"{self.kind} state has shape {self.values.shape}, expected {expected}")

    @classmethod
    def from_fields(cls, kind: ModelKind, grid: Grid, fields) -> "SystemState":
        values = np.stack([np.broadcast_to(np.asarray(f, dtype=np.float64), grid.shape) for f in fields])
        return cls(kind=kind, grid=grid, values=values)

    @classmethod
    def homogeneous(cls, kind: ModelKind, grid: Grid, levels) -> "SystemState":
        return cls.from_fields(kind, grid, [grid.constant(x) for x in levels])

    @property
    def species(self) -> Tuple[Field, ...]:
        return tuple(self.values)

    def field(self, name: str) -> Field:
        return self.values[self.kind.species.index(name)]

    def with_values(self, values: np.ndarray) -> "SystemState":
        return SystemState(kind=self.kind, grid=self.grid, values=values)

    @property
    def negativity_tolerance(self) -> float:
        return NEGATIVITY_RTOL * max(1.0, float(np.max(np.abs(self.values))))

    def spatial_variation(self) -> float:
        """Largest max-minus-min over species"""
        flat = self.values.reshape(self.values.shape[0], -1)
        return float(np.max(flat.max(axis=1) - flat.min(axis=1)))


def _guard(denominator: np.ndarray, what: str) -> None:
    lowest = float(np.min(denominator))
    if not lowest >= DENOMINATOR_FLOOR:
        raise DivisionByVanishingDenominator(f"{what} fell to {lowest:.3g}")


def meso_diffusivity(p: DimensionalParams, P: Field, T: Field) -> Field:
    """Convex combination of d2_1, d2_2 weighting searching vs handling meso-predators"""
    searching = p.gamma_tilde * (1.0 + p.c_tilde * T)
    handling = p.alpha_tilde * P
    return (p.d2_1 * searching + p.d2_2 * handling) / (searching + handling)


def top_diffusivity(p: DimensionalParams, M: Field) -> Field:
    """Convex combination of d3_1, d3_2; M is the total meso-predator density"""
    handling = p.beta_tilde * M
    return (p.d3_1 * p.eta_tilde + p.d3_2 * handling) / (p.eta_tilde + handling)


def meso_diffusivity_dimless(p: DimensionlessParams, u: Field, w: Field) -> Field:
    searching = p.b + p.c * w
    return (p.D2_1 * searching + p.D2_2 * u) / (searching + u)


def top_diffusivity_dimless(p: DimensionlessParams, v: Field) -> Field:
    return (p.D3_1 * p.n + p.D3_2 * v) / (p.n + v)


def micro5_reaction(values: np.ndarray, p: DimensionalParams) -> np.ndarray:
    P, Ms, Mh, Ts, Th = values
    M = Ms + Mh
    _guard(M, "Ms + Mh")
    top = Ts + Th
    capture = p.alpha_tilde * P * Ms / (1.0 + p.c_tilde * top)
    meso_switch = (-capture + p.gamma_tilde * Mh) / p.delta
    top_switch = (-p.beta_tilde * M * Ts + p.eta_tilde * Th) / p.epsilon
    leslie = p.s_tilde * (1.0 - top / (p.m_tilde * M))
    return np.stack([
        p.r_tilde * (1.0 - P / p.K) * P - capture,
        meso_switch + p.Gamma * Mh - p.mu_tilde * Ms - p.beta_tilde * Ms * Ts,
        -meso_switch - p.mu_tilde * Mh - p.beta_tilde * Mh * Ts,
        top_switch + Ts * leslie,
        -top_switch + Th * leslie,
    ])


def micro5_diffusion(values: np.ndarray, p: DimensionalParams, g: Grid) -> np.ndarray:
    coefficients = (p.d1, p.d2_1, p.d2_2, p.d3_1, p.d3_2)
    return np.stack([d * laplacian(f, g) for d, f in zip(coefficients, values)])


def meso4_reaction(values: np.ndarray, p: DimensionalParams,
                   prey_uptake: PreyUptake = PreyUptake.SEARCHING) -> np.ndarray:
    P, Ms, Mh, T = values
    M = Ms + Mh
    _guard(M, "Ms + Mh")
    capture = p.alpha_tilde * P * Ms / (1.0 + p.c_tilde * T)
    if prey_uptake is PreyUptake.SATURATED:
        prey_loss = (p.alpha_tilde * p.gamma_tilde * P * M
                     / (p.gamma_tilde + p.alpha_tilde * P + p.c_tilde * p.gamma_tilde * T))
    else:
        prey_loss = capture
    meso_switch = (-capture + p.gamma_tilde * Mh) / p.delta
    # top-predator predation with Ts on the eps-constraint manifold
    predation = p.beta_tilde * p.eta_tilde * T / (p.eta_tilde + p.beta_tilde * M)
    return np.stack([
        p.r_tilde * (1.0 - P / p.K) * P - prey_loss,
        meso_switch + p.Gamma * Mh - p.mu_tilde * Ms - predation * Ms,
        -meso_switch - p.mu_tilde * Mh - predation * Mh,
        p.s_tilde * T * (1.0 - T / (p.m_tilde * M)),
    ])


def meso4_diffusion(values: np.ndarray, p: DimensionalParams, g: Grid) -> np.ndarray:
    P, Ms, Mh, T = values
    M = Ms + Mh
    _guard(M, "Ms + Mh")
    return np.stack([
        p.d1 * laplacian(P, g),
        p.d2_1 * laplacian(Ms, g),
        p.d2_2 * laplacian(Mh, g),
        cross_diffusion(top_diffusivity(p, M), T, g),
    ])


def macro3_reaction(values: np.ndarray, p: DimensionalParams) -> np.ndarray:
    P, M, T = values
    _guard(M, "M")
    holling = P * M / (p.gamma_tilde + p.alpha_tilde * P + p.c_tilde * p.gamma_tilde * T)
    return np.stack([
        p.r_tilde * (1.0 - P / p.K) * P - p.alpha_tilde * p.gamma_tilde * holling,
        p.Gamma * p.alpha_tilde * holling - p.mu_tilde * M
        - p.eta_tilde * p.beta_tilde * M * T / (p.eta_tilde + p.beta_tilde * M),
        p.s_tilde * (1.0 - T / (p.m_tilde * M)) * T,
    ])


def macro3_diffusion(values: np.ndarray, p: DimensionalParams, g: Grid) -> np.ndarray:
    P, M, T = values
    _guard(M, "M")
    return np.stack([
        p.d1 * laplacian(P, g),
        cross_diffusion(meso_diffusivity(p, P, T), M, g),
        cross_diffusion(top_diffusivity(p, M), T, g),
    ])


def macro3_dimless_reaction(values: np.ndarray, p: DimensionlessParams) -> np.ndarray:
    u, v, w = values
    _guard(v, "v")
    holling = 1.0 / (p.b + u + p.c * w)
    return np.stack([
        u * (1.0 - u - v * holling),
        p.q * v * (u * holling - p.d - p.e * w / (p.n + v)),
        w * p.s * (1.0 - w / v),
    ])


def macro3_dimless_diffusion(values: np.ndarray, p: DimensionlessParams, g: Grid) -> np.ndarray:
    u, v, w = values
    _guard(v, "v")
    return np.stack([
        p.D1 * laplacian(u, g),
        cross_diffusion(meso_diffusivity_dimless(p, u, w), v, g),
        cross_diffusion(top_diffusivity_dimless(p, v), w, g),
    ])


@dataclass(frozen=True)
class ModelRHS:
    """d/dt of one system, bound to its parameters and grid"""

    kind: ModelKind
    params: Params
    grid: Grid
    prey_uptake: PreyUptake = PreyUptake.SEARCHING

    def __post_init__(self) -> None:
        wanted = DimensionlessParams if self.kind.dimensionless else DimensionalParams
        if not isinstance(self.params, wanted):
            raise TypeError(f"{self.kind} needs {wanted.__name__}, got {type(self.params).__name__}")

    def reaction(self, values: np.ndarray) -> np.ndarray:
        if self.kind is ModelKind.MICRO5:
            return micro5_reaction(values, self.params)
        if self.kind is ModelKind.MESO4:
            return meso4_reaction(values, self.params, self.prey_uptake)
        if self.kind is ModelKind.MACRO3:
            return macro3_reaction(values, self.params)
        return macro3_dimless_reaction(values, self.params)

    def diffusion(self, values: np.ndarray) -> np.ndarray:
        if self.kind is ModelKind.MICRO5:
            return micro5_diffusion(values, self.params, self.grid)
        if self.kind is ModelKind.MESO4:
            return meso4_diffusion(values, self.params, self.grid)
        if self.kind is ModelKind.MACRO3:
            return macro3_diffusion(values, self.params, self.grid)
        return macro3_dimless_diffusion(values, self.params, self.grid)

    def __call__(self, st: SystemState) -> SystemState:
        if st.kind is not self.kind:
            raise ValueError(f"state is {st.kind}, model is {self.kind}")
        return st.with_values(self.reaction(st.values) + self.diffusion(st.values))


def make_rhs(kind: ModelKind, params: Params, grid: Grid,
             prey_uptake: PreyUptake = PreyUptake.SEARCHING) -> ModelRHS:
    return ModelRHS(kind=ModelKind(kind), params=params, grid=grid, prey_uptake=prey_uptake)


def rhs_micro5(st: SystemState, p: DimensionalParams, g: Grid) -> SystemState:
    return make_rhs(ModelKind.MICRO5, p, g)(st)


def rhs_meso4(st: SystemState, p: DimensionalParams, g: Grid,
              prey_uptake: PreyUptake = PreyUptake.SEARCHING) -> SystemState:
    return make_rhs(ModelKind.MESO4, p, g, prey_uptake)(st)


def rhs_macro3(st: SystemState, p: DimensionalParams, g: Grid) -> SystemState:
    return make_rhs(ModelKind.MACRO3, p, g)(st)


def rhs_macro3_dimless(st: SystemState, p: DimensionlessParams, g: Grid) -> SystemState:
    return make_rhs(ModelKind.MACRO3_DIMLESS, p, g)(st)


RHS = Callable[[SystemState], SystemState]


def dimensionless_state(st: SystemState, p: DimensionalParams, L: float) -> SystemState:
    """Rescale a macro3 state; the returned grid has lengths divided by L"""
    if st.kind is not ModelKind.MACRO3:
        raise ValueError(f"expected a macro3 state, got {st.kind}")
    g = st.grid
    grid = build_grid(g.dim, g.cells, [length / L for length in g.lengths])
    scales = np.asarray(species_scales(p)).reshape((3,) + (1,) * g.dim)
    return SystemState(kind=ModelKind.MACRO3_DIMLESS, grid=grid, values=st.values / scales)


def split_meso(p: DimensionalParams, P: Field, M: Field, T: Field) -> Tuple[Field, Field]:
    """(Ms, Mh) summing to M with the delta bracket at rest"""
    ratio = p.alpha_tilde * P / (p.gamma_tilde * (1.0 + p.c_tilde * T))
    return M / (1.0 + ratio), M * ratio / (1.0 + ratio)


def split_top(p: DimensionalParams, M: Field, T: Field) -> Tuple[Field, Field]:
    """(Ts, Th) summing to T with the eps bracket at rest; M = Ms + Mh"""
    handling = p.beta_tilde * M
    return T * p.eta_tilde / (p.eta_tilde + handling), T * handling / (p.eta_tilde + handling)


def aggregate(st: SystemState, target: ModelKind) -> SystemState:
    """Sum split species down to a coarser system (micro5 -> meso4 -> macro3)"""
    order = (ModelKind.MICRO5, ModelKind.MESO4, ModelKind.MACRO3)
    if st.kind not in order or target not in order or order.index(target) < order.index(st.kind):
        raise ValueError(f"cannot aggregate {st.kind} into {target}")
    values = st.values
    if st.kind is ModelKind.MICRO5 and target is not ModelKind.MICRO5:
        P, Ms, Mh, Ts, Th = values
        values = np.stack([P, Ms, Mh, Ts + Th])
    if target is ModelKind.MACRO3 and st.kind is not ModelKind.MACRO3:
        P, Ms, Mh, T = values
        values = np.stack([P, Ms + Mh, T])
    return SystemState(kind=target, grid=st.grid, values=values)


def lift(st: SystemState, p: DimensionalParams, target: ModelKind) -> SystemState:
    """Inverse of aggregate using the quasi-steady splits"""
    order = (ModelKind.MACRO3, ModelKind.MESO4, ModelKind.MICRO5)
    if st.kind not in order or target not in order or order.index(target) < order.index(st.kind):
        raise ValueError(f"cannot lift {st.kind} into {target}")
    values = st.values
    if st.kind is ModelKind.MACRO3 and target is not ModelKind.MACRO3:
        P, M, T = values
        Ms, Mh = split_meso(p, P, M, T)
        values = np.stack([P, Ms, Mh, T])
    if target is ModelKind.MICRO5 and st.kind is not ModelKind.MICRO5:
        P, Ms, Mh, T = values
        Ts, Th = split_top(p, Ms + Mh, T)
        values = np.stack([P, Ms, Mh, Ts, Th])
    return SystemState(kind=target, grid=st.grid, values=values)
