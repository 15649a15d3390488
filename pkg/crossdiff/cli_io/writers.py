"""CSV and JSON artifacts. Floats are written with 17 significant digits so they read back exactly."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import numpy as np

from crossdiff.errors import GridError, OutputError
from crossdiff.grid_ops import Field, Grid

logger = logging.getLogger(__name__)

AXES = ("x", "y")


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_table_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    logger.debug("wrote %s", path)
    return path


def write_field_csv(f: Field, g: Grid, path: Path) -> Path:
    """One row per cell centre, x varying fastest"""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != g.shape:
        raise GridError(f"field has shape {f.shape}, grid expects {g.shape}")
    columns = [axis.ravel(order="F") for axis in g.mesh()] + [f.ravel(order="F")]
    header = list(AXES[:g.dim]) + ["value"]
    return write_table_csv(path, header, zip(*columns))


def read_field_csv(path: Path, g: Grid) -> Field:
    """Inverse of write_field_csv; coordinates must match the grid's cell centres"""
    path = Path(path)
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise OutputError(f"cannot parse {path}: {exc}") from exc
    if table.shape != (g.size, g.dim + 1):
        raise GridError(f"{path} holds {table.shape[0]} rows of {table.shape[1]} columns, "
                        f"grid expects {g.size} of {g.dim + 1}")
    for axis, coords in enumerate(g.mesh()):
        if not np.allclose(table[:, axis], coords.ravel(order="F"), rtol=0.0, atol=1e-12 * g.lengths[axis]):
            raise GridError(f"{path}: {AXES[axis]} coordinates do not match the grid")
    return table[:, -1].reshape(g.shape, order="F").copy()


def write_manifest(path: Path, doc: Dict[str, Any]) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path
