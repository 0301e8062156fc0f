"""Uniform structured grids and sampled fields with finite-difference operators.

Three geometries are supported: a 1D interval, a 2D slab rectangle, and a
radial half-line starting at r = 0.  All derivative operators are second
order: central differences at interior nodes, 3-point one-sided stencils at
boundary nodes (so no ghost nodes are needed and the global order stays 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INTERVAL = "interval"
SLAB2D = "slab2d"
RADIAL = "radial"

GEOMETRIES = (INTERVAL, SLAB2D, RADIAL)


class GridError(ValueError):
    """Invalid grid construction or grid query."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid on [lo, hi] with n_cells cells (n_cells + 1 nodes).

    node(i) = lo + i*h is reconstructible exactly for every node index.
    """

    lo: float
    hi: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise GridError("grid bounds must be finite")
        if self.hi <= self.lo:
            raise GridError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.n_cells < 8:
            raise GridError(f"need n_cells >= 8, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    def node(self, i: int) -> float:
        if not 0 <= i <= self.n_cells:
            raise GridError(f"node index {i} out of range [0, {self.n_cells}]")
        return self.lo + i * self.h

    def nodes(self) -> np.ndarray:
        return self.lo + np.arange(self.n_nodes) * self.h


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid for a slab rectangle: x1 longitudinal, x2 transverse.

    The x2 extent is meant to sit strictly inside the open slab (-b, b);
    that containment is checked by `slab_grid`, which knows b.
    """

    x1: Grid1D
    x2: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x1.n_nodes, self.x2.n_nodes)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1.nodes(), self.x2.nodes(), indexing="ij")


def slab_grid(L: float, b: float, delta: float, h: float) -> Grid2D:
    """Grid for the truncated slab [-L, L] x [-b+delta, b-delta].

    Requires delta > 0 and b - delta > 0 so the x2 extent is strictly inside
    (-b, b).  Cell counts are rounded so spacings are as close to h as the
    extents allow.
    """
    if delta <= 0 or b - delta <= 0:
        raise GridError(f"need 0 < delta < b, got delta={delta}, b={b}")
    n1 = max(8, int(round(2 * L / h)))
    n2 = max(8, int(round(2 * (b - delta) / h)))
    return Grid2D(Grid1D(-L, L, n1), Grid1D(-(b - delta), b - delta, n2))


@dataclass(frozen=True)
class Field:
    """Real samples of a graph function on a grid, tagged with its geometry.

    geometry is one of "interval", "slab2d", "radial"; n is the dimension of
    the graph (1 for an interval, 2 for a slab, the ambient graph dimension
    for a radial field).  Fields are immutable after construction: the value
    array is copied and marked read-only, so they are safe to share across
    concurrent runs.
    """

    grid: Grid1D | Grid2D
    values: np.ndarray
    geometry: str = INTERVAL
    n: int = 0

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise GridError(f"unknown geometry {self.geometry!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if self.geometry == SLAB2D:
            if not isinstance(self.grid, Grid2D):
                raise GridError("slab2d fields need a Grid2D")
            if vals.shape != self.grid.shape:
                raise GridError(
                    f"values shape {vals.shape} != grid shape {self.grid.shape}")
        else:
            if not isinstance(self.grid, Grid1D):
                raise GridError(f"{self.geometry} fields need a Grid1D")
            if vals.shape != (self.grid.n_nodes,):
                raise GridError(
                    f"values shape {vals.shape} != ({self.grid.n_nodes},)")
        if self.geometry == RADIAL and self.grid.lo != 0.0:
            raise GridError("radial grids must start at r = 0")
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        default_n = {INTERVAL: 1, SLAB2D: 2, RADIAL: 2}[self.geometry]
        n = self.n if self.n > 0 else default_n
        if self.geometry == INTERVAL and n != 1:
            raise GridError("interval fields have graph dimension 1")
        if self.geometry == SLAB2D and n != 2:
            raise GridError("slab2d fields have graph dimension 2")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "n", n)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.geometry, self.n)


def sample(grid, fn, geometry=INTERVAL, n=0) -> Field:
    """Field from a callable: fn(x) on Grid1D, fn(x1, x2) on Grid2D."""
    if isinstance(grid, Grid2D):
        X1, X2 = grid.meshgrid()
        return Field(grid, fn(X1, X2), SLAB2D, n)
    return Field(grid, fn(grid.nodes()), geometry, n)


def _d1_line(vals: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _d2_line(vals: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    # 4-point one-sided stencils keep second order at the ends
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (h * h)
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


def _axis_grid(f: Field, axis: int) -> Grid1D:
    if f.geometry == SLAB2D:
        if axis not in (0, 1):
            raise GridError(f"axis {axis} out of range for slab2d")
        return (f.grid.x1, f.grid.x2)[axis]
    if axis != 0:
        raise GridError(f"axis {axis} out of range for {f.geometry}")
    return f.grid


def d1(f: Field, axis: int = 0) -> Field:
    """First derivative along an axis, second order everywhere.

    Exact for affine fields; central differences are exact for quadratics
    at interior nodes.
    """
    g = _axis_grid(f, axis)
    if g.n_nodes < 3:
        raise GridError("d1 needs at least 3 nodes along the axis")
    return f.with_values(_d1_line(f.values, g.h, axis))


def d2(f: Field, axis: int = 0) -> Field:
    """Second derivative along an axis, second order everywhere."""
    g = _axis_grid(f, axis)
    if g.n_nodes < 4:
        raise GridError("d2 needs at least 4 nodes along the axis")
    return f.with_values(_d2_line(f.values, g.h, axis))


def hessian(f: Field) -> tuple[Field, Field, Field]:
    """(d11, d12, d22) for a slab2d field; d12 is the centered cross stencil
    at interior nodes (composition of the two one-dimensional d1 operators)."""
    if f.geometry != SLAB2D:
        raise GridError("hessian is defined for slab2d fields")
    d11 = d2(f, 0)
    d22 = d2(f, 1)
    d12 = d1(d1(f, 0), 1)
    return d11, d12, d22


def restrict(f: Field) -> Field:
    """Every-other-node coarsening; exact at shared nodes."""
    if f.geometry == SLAB2D:
        g1, g2 = f.grid.x1, f.grid.x2
        if g1.n_cells % 2 or g2.n_cells % 2:
            raise GridError("restrict needs even n_cells along both axes")
        grid = Grid2D(Grid1D(g1.lo, g1.hi, g1.n_cells // 2),
                      Grid1D(g2.lo, g2.hi, g2.n_cells // 2))
        return Field(grid, f.values[::2, ::2], SLAB2D, f.n)
    g = f.grid
    if g.n_cells % 2:
        raise GridError("restrict needs even n_cells")
    grid = Grid1D(g.lo, g.hi, g.n_cells // 2)
    return Field(grid, f.values[::2], f.geometry, f.n)


def _locate(g: Grid1D, x: float) -> tuple[int, float]:
    if x < g.lo or x > g.hi:
        raise GridError(f"query {x} outside [{g.lo}, {g.hi}]")
    s = (x - g.lo) / g.h
    i = min(int(np.floor(s)), g.n_cells - 1)
    return i, s - i


def linterp(f: Field, x) -> float:
    """Piecewise-(bi)linear interpolation; exact at grid nodes."""
    if f.geometry == SLAB2D:
        x1, x2 = x
        i, a = _locate(f.grid.x1, x1)
        j, b = _locate(f.grid.x2, x2)
        v = f.values
        return float((1 - a) * ((1 - b) * v[i, j] + b * v[i, j + 1])
                     + a * ((1 - b) * v[i + 1, j] + b * v[i + 1, j + 1]))
    i, a = _locate(f.grid, float(x))
    v = f.values
    return float((1 - a) * v[i] + a * v[i + 1])
