"""Dispatch a RunSpec to its pipeline and write the artifacts plus manifest.json."""

from __future__ import annotations

import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pydantic
import scipy

from crossdiff import __version__
from crossdiff.cli_io.config import Command, FromFile, Homogeneous, PerturbedEquilibrium, RunSpec
from crossdiff.cli_io.writers import read_field_csv, write_field_csv, write_manifest, write_table_csv
from crossdiff.equilibria import equilibrium_report, equilibrium_residual, interior_equilibrium
from crossdiff.errors import ConfigValidationError, OutputError
from crossdiff.grid_ops import Grid
from crossdiff.integrator import integrate, prey_growth_ratio
from crossdiff.limits import ConvergenceTable, run_delta_sweep, run_epsilon_sweep
from crossdiff.models import (
    ModelKind,
    SystemState,
    domain_diameter,
    lift,
    make_rhs,
    nondimensionalize,
    redimensionalize,
)
from crossdiff.stability import dispersion_scan, sign_ledger, stability_report

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"

Results = Dict[str, Any]


@dataclass
class OutputBundle:
    manifest: Dict[str, Any]
    artifacts: List[Path] = field(default_factory=list)


def versions() -> Dict[str, str]:
    return {
        "crossdiff": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def initial_state(cfg: RunSpec, kind: ModelKind, grid: Grid) -> SystemState:
    ic = cfg.initial
    species = kind.species
    if isinstance(ic, Homogeneous):
        if len(ic.values) != len(species):
            raise ConfigValidationError("initial.values", f"{kind} needs {len(species)} values {species}")
        return SystemState.homogeneous(kind, grid, ic.values)
    if isinstance(ic, FromFile):
        if len(ic.paths) != len(species):
            raise ConfigValidationError("initial.paths", f"{kind} needs {len(species)} files {species}")
        return SystemState.from_fields(kind, grid, [read_field_csv(Path(p), grid) for p in ic.paths])
    if isinstance(ic, PerturbedEquilibrium):
        return _perturbed_equilibrium(cfg, ic, kind, grid)
    raise ConfigValidationError("initial", "missing initial condition")


def _perturbed_equilibrium(cfg: RunSpec, ic: PerturbedEquilibrium, kind: ModelKind, grid: Grid) -> SystemState:
    if len(ic.modes) != grid.dim:
        raise ConfigValidationError("initial.modes", f"need one mode per axis ({grid.dim})")
    p = cfg.params
    estar = interior_equilibrium(nondimensionalize(p, domain_diameter(grid)))
    base = SystemState.homogeneous(ModelKind.MACRO3, grid, redimensionalize(p, estar))
    st = lift(base, p, kind) if kind is not ModelKind.MACRO3 else base
    shape = np.ones(grid.shape)
    for axis, (k, x) in enumerate(zip(ic.modes, grid.mesh())):
        shape *= np.cos(k * np.pi * x / grid.lengths[axis])
    factor = 1.0 + ic.amplitude * shape
    if ic.noise > 0.0:
        rng = np.random.default_rng(ic.seed)
        factor = factor * (1.0 + ic.noise * rng.uniform(-1.0, 1.0, grid.shape))
    return st.with_values(st.values * factor[None, ...])


def _summary(st: SystemState) -> List[float]:
    row: List[float] = []
    for f in st.species:
        row += [float(f.min()), float(f.mean()), float(f.max())]
    return row


def _simulate(cfg: RunSpec, out: Path) -> Tuple[Results, List[Path]]:
    grid = cfg.grid.build()
    kind = cfg.model
    st0 = initial_state(cfg, kind, grid)
    series: List[List[float]] = []
    traj = integrate(make_rhs(kind, cfg.params, grid, cfg.prey_uptake), st0, cfg.policy,
                     observers=[lambda t, st: series.append([t] + _summary(st))])

    artifacts = [write_field_csv(f, grid, out / f"final_{name}.csv")
                 for name, f in zip(kind.species, traj.final.species)]
    header = ["t"] + [f"{name}_{stat}" for name in kind.species for stat in ("min", "mean", "max")]
    artifacts.append(write_table_csv(out / "timeseries.csv", header, series))
    results = {
        "model": kind.value,
        "steps": traj.steps,
        "retries": traj.retries,
        "t_end": traj.times[-1],
        "prey_growth_ratio": prey_growth_ratio(traj, cfg.params.r_tilde),
        "final_min": float(traj.final.values.min()),
        "spatial_variation": traj.final.spatial_variation(),
    }
    return results, artifacts


def _equilibria(cfg: RunSpec, out: Path) -> Tuple[Results, List[Path]]:
    p = cfg.params
    rep = equilibrium_report(p)
    rows = []
    for label, point, residual in (
        ("E1", rep.e1, equilibrium_residual(p, rep.e1) if rep.e1 else None),
        ("Estar", rep.estar, rep.estar_residual),
    ):
        if point is None:
            rows.append([label, None, None, None, None, False])
        else:
            rows.append([label, *point, float(np.max(np.abs(residual))), True])
    path = write_table_csv(out / "equilibria.csv", ["kind", "u", "v", "w", "residual_inf", "exists_condition"], rows)
    results = {
        "e1": rep.e1,
        "e1_exists_condition": rep.e1_exists_condition,
        "estar": rep.estar,
        "bracket_count": rep.bracket_count,
        "roots": rep.roots,
    }
    return results, [path]


def _dispersion(cfg: RunSpec, out: Path) -> Tuple[Results, List[Path]]:
    p = cfg.params
    estar = interior_equilibrium(p)
    report = stability_report(p, estar)
    curve = dispersion_scan(p, estar, cfg.k2max, cfg.samples)
    path = write_table_csv(out / "dispersion.csv", ["k2", "Tk", "I2k", "hk", "max_re_lambda"],
                           zip(curve.k2, curve.Tk, curve.I2k, curve.hk, curve.max_re_lambda))
    results = {
        "estar": estar,
        "classification": curve.classification.value,
        "violations": curve.violations,
        "k2max": curve.k2max,
        "rh_stable": report.rh_stable,
        "inv0": report.inv0,
        "jacobian": report.a.tolist(),
        "jacobian_displayed": report.a_printed.tolist(),
        "mismatched_entries": report.mismatched_entries,
        "sign_ledger": [{"name": i.name, "value": i.value, "passed": i.passed} for i in sign_ledger(p, estar)],
    }
    return results, [path]


def _table_results(table: ConvergenceTable) -> Results:
    return {
        "fitted_order_constraint": table.fitted_order_constraint,
        "fitted_order_gap": table.fitted_order_gap,
        "floor_min": table.floor_min,
        "split_l2": table.split_l2,
        "growth_ratio": table.growth_ratio,
    }


def _sweep_eps(cfg: RunSpec, out: Path) -> Tuple[Results, List[Path]]:
    grid = cfg.grid.build()
    ic = initial_state(cfg, ModelKind.MICRO5, grid)
    table = run_epsilon_sweep(cfg.params, cfg.eps_list, ic, cfg.policy, cfg.max_workers)
    path = write_table_csv(out / "convergence.csv", ["eps", "constraint_l1", "state_gap"], table.rows())
    return _table_results(table), [path]


def _sweep_delta(cfg: RunSpec, out: Path) -> Tuple[Results, List[Path]]:
    grid = cfg.grid.build()
    ic = initial_state(cfg, ModelKind.MESO4, grid)
    table = run_delta_sweep(cfg.params, cfg.delta_list, ic, cfg.policy, cfg.max_workers, cfg.prey_uptake)
    path = write_table_csv(out / "convergence.csv", ["delta", "constraint_l1", "state_gap"], table.rows())
    return _table_results(table), [path]


PIPELINES: Dict[Command, Callable[[RunSpec, Path], Tuple[Results, List[Path]]]] = {
    Command.SIMULATE: _simulate,
    Command.EQUILIBRIA: _equilibria,
    Command.DISPERSION: _dispersion,
    Command.SWEEP_EPS: _sweep_eps,
    Command.SWEEP_DELTA: _sweep_delta,
}


def run(cfg: RunSpec) -> OutputBundle:
    started = time.perf_counter()
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc

    logger.info("running %s into %s", cfg.command, out)
    results, artifacts = PIPELINES[cfg.command](cfg, out)
    manifest = {
        "command": cfg.command.value,
        "config": cfg.model_dump(mode="json"),
        "versions": versions(),
        "wall_time_s": time.perf_counter() - started,
        "results": results,
        "artifacts": [a.name for a in artifacts],
    }
    write_manifest(out / MANIFEST, manifest)
    logger.info("%s finished in %.2fs", cfg.command, manifest["wall_time_s"])
    return OutputBundle(manifest=manifest, artifacts=artifacts)
