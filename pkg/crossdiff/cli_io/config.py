"""Run configuration: strict JSON documents validated into a RunSpec."""

from __future__ import annotations

import json
from enum import StrEnum, unique
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from crossdiff.errors import ConfigParseError, ConfigValidationError, MissingParameter
from crossdiff.grid_ops import MIN_CELLS, Grid, build_grid
from crossdiff.integrator import StepPolicy
from crossdiff.limits import DEFAULT_DELTA_LIST, DEFAULT_EPS_LIST
from crossdiff.models import DimensionalParams, DimensionlessParams, ModelKind, Params, PreyUptake
from crossdiff.stability import DEFAULT_SAMPLES, MIN_SAMPLES


@unique
class Command(StrEnum):
    SIMULATE = "simulate"
    EQUILIBRIA = "equilibria"
    DISPERSION = "dispersion"
    SWEEP_EPS = "sweep-eps"
    SWEEP_DELTA = "sweep-delta"

    @property
    def dimensionless(self) -> bool:
        return self in (Command.EQUILIBRIA, Command.DISPERSION)

    @property
    def needs_state(self) -> bool:
        return not self.dimensionless


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    dim: int = Field(ge=1, le=2)
    cells: List[Annotated[int, Field(ge=MIN_CELLS)]]
    lengths: List[PositiveFloat]

    @model_validator(mode="after")
    def _matches_dim(self) -> "GridSpec":
        if len(self.cells) != self.dim or len(self.lengths) != self.dim:
            raise ValueError(f"cells and lengths need {self.dim} entries")
        return self

    def build(self) -> Grid:
        return build_grid(self.dim, self.cells, self.lengths)


class Homogeneous(_Strict):
    type: Literal["homogeneous"]
    values: List[Annotated[float, Field(ge=0.0)]]


class PerturbedEquilibrium(_Strict):
    """E* times 1 + amplitude * prod cos(k_i pi x_i / L_i), plus optional seeded noise"""

    type: Literal["perturbed_equilibrium"]
    amplitude: float = Field(ge=0.0, lt=1.0)
    modes: List[Annotated[int, Field(ge=0)]]
    seed: Optional[int] = None
    noise: float = Field(default=0.0, ge=0.0, lt=1.0)


class FromFile(_Strict):
    type: Literal["from_file"]
    paths: List[str]


InitialSpec = Annotated[Union[Homogeneous, PerturbedEquilibrium, FromFile], Field(discriminator="type")]


class RunSpec(_Strict):
    command: Command
    params: Params
    model: ModelKind = ModelKind.MACRO3
    prey_uptake: PreyUptake = PreyUptake.SEARCHING
    grid: Optional[GridSpec] = None
    initial: Optional[InitialSpec] = None
    policy: StepPolicy = StepPolicy()
    eps_list: List[PositiveFloat] = list(DEFAULT_EPS_LIST)
    delta_list: List[PositiveFloat] = list(DEFAULT_DELTA_LIST)
    k2max: Optional[PositiveFloat] = None
    samples: int = Field(default=DEFAULT_SAMPLES, ge=MIN_SAMPLES)
    max_workers: int = Field(default=1, ge=1)
    output_dir: str = "."

    @model_validator(mode="after")
    def _universe_matches_command(self) -> "RunSpec":
        wanted = DimensionlessParams if self.command.dimensionless else DimensionalParams
        if not isinstance(self.params, wanted):
            raise ValueError(f"{self.command} takes {wanted.__name__}")
        if self.command is Command.SIMULATE and self.model is ModelKind.MACRO3_DIMLESS:
            raise ValueError("simulate runs micro5, meso4 or macro3")
        return self


def _key(loc) -> str:
    return ".".join(str(part) for part in loc) or "config"


def _translate(exc: ValidationError, prefix: tuple = ()) -> Exception:
    errors = exc.errors()
    # a misspelled key also shows up as a missing one; name the typo
    for err in errors:
        if err["type"] == "extra_forbidden":
            return ConfigValidationError(_key(prefix + tuple(err["loc"])), "unknown key")
    err = errors[0]
    loc = prefix + tuple(err["loc"])
    if err["type"] == "missing":
        return MissingParameter(str(loc[-1]))
    return ConfigValidationError(_key(loc), err["msg"])


def parse_config(text: str, command: Optional[str] = None) -> RunSpec:
    """Validate a JSON document; `command` (from the CLI) must agree with any "command" key"""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ConfigValidationError("config", "top level must be an object")

    if command is not None:
        if "command" in doc and doc["command"] != str(command):
            raise ConfigValidationError("command", f"config says {doc['command']!r}, invoked as {command!r}")
        doc["command"] = str(command)
    if "command" not in doc:
        raise MissingParameter("command")
    try:
        cmd = Command(doc["command"])
    except ValueError as exc:
        raise ConfigValidationError("command", f"unknown command {doc['command']!r}") from exc

    if "params" not in doc:
        raise MissingParameter("params")
    universe = DimensionlessParams if cmd.dimensionless else DimensionalParams
    try:
        doc["params"] = universe.model_validate(doc["params"])
    except ValidationError as exc:
        raise _translate(exc, ("params",)) from exc

    try:
        cfg = RunSpec.model_validate(doc)
    except ValidationError as exc:
        raise _translate(exc) from exc

    if cmd.needs_state:
        if cfg.grid is None:
            raise MissingParameter("grid")
        if cfg.initial is None:
            raise MissingParameter("initial")
    return cfg
