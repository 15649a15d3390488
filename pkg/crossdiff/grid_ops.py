"""
Cell-centred finite differences on a rectangle with homogeneous Neumann
boundaries.

Fields are plain float64 arrays shaped ``grid.shape``; axis 0 is x, axis 1
(in 2D) is y. Mirror ghost cells (u[-1] = u[0]) make the discrete normal flux
vanish, so every row of the Laplacian sums to zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from crossdiff.errors import GridError, NonFiniteField

logger = logging.getLogger(__name__)

Field = npt.NDArray[np.float64]

MIN_CELLS = 3


@dataclass(frozen=True)
class Grid:
    dim: int
    cells: Tuple[int, ...]
    lengths: Tuple[float, ...]
    spacing: Tuple[float, ...]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    def centers(self, axis: int) -> Field:
        """Cell-centre coordinates along one axis"""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis], dtype=np.float64) + 0.5) * h

    def mesh(self) -> List[Field]:
        """Coordinate arrays shaped like a field, one per axis"""
        return list(np.meshgrid(*(self.centers(a) for a in range(self.dim)), indexing="ij"))

    def constant(self, value: float) -> Field:
        return np.full(self.shape, float(value), dtype=np.float64)


def build_grid(dim: int, cells: Sequence[int], lengths: Sequence[float]) -> Grid:
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    if len(cells) != dim or len(lengths) != dim:
        raise GridError(f"expected {dim} cells and lengths, got {len(cells)} and {len(lengths)}")
    cells_t = tuple(int(n) for n in cells)
    lengths_t = tuple(float(x) for x in lengths)
    for n in cells_t:
        if n < MIN_CELLS:
            raise GridError(f"cells per axis must be >= {MIN_CELLS}, got {n}")
    for length in lengths_t:
        if not np.isfinite(length) or length <= 0.0:
            raise GridError(f"lengths must be positive and finite, got {length}")
    spacing = tuple(length / n for length, n in zip(lengths_t, cells_t))
    return Grid(dim=dim, cells=cells_t, lengths=lengths_t, spacing=spacing)


def _check_field(u: Field, g: Grid, name: str = "field") -> Field:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != g.shape:
        raise GridError(f"{name} has shape {u.shape}, grid expects {g.shape}")
    if not np.all(np.isfinite(u)):
        raise NonFiniteField(f"{name} contains NaN or Inf")
    return u


def laplacian(u: Field, g: Grid) -> Field:
    """Second-order central Laplacian with mirror (even) ghost cells"""
    u = _check_field(u, g)
    padded = np.pad(u, 1, mode="edge")
    out = np.zeros_like(u)
    for axis, h in enumerate(g.spacing):
        lo = [slice(1, -1)] * g.dim
        hi = [slice(1, -1)] * g.dim
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out += (padded[tuple(lo)] - 2.0 * u + padded[tuple(hi)]) / (h * h)
    return out


def cross_diffusion(gcoef: Field, u: Field, g: Grid) -> Field:
    """Laplacian of the pointwise product gcoef * u"""
    gcoef = _check_field(gcoef, g, "coefficient")
    u = _check_field(u, g)
    return laplacian(gcoef * u, g)


def integrate_field(u: Field, g: Grid) -> float:
    """Midpoint-rule integral over the domain"""
    return float(np.sum(u) * g.cell_volume)


def l1_norm(u: Field, g: Grid) -> float:
    return float(np.sum(np.abs(u)) * g.cell_volume)


def l2_norm(u: Field, g: Grid) -> float:
    return float(np.sqrt(np.sum(u * u) * g.cell_volume))
