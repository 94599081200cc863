"""Bilinear quadrilateral finite elements on a uniform rectangular grid.

The diffusion coefficient is piecewise constant per cell, solution fields are
nodal. Cells are indexed row-major as j*nx + i, nodes as j*(nx+1) + i, with i
running fastest. Cell corners are ordered counterclockwise SW, SE, NE, NW.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .cg import SparseSpdMatrix

_GAUSS = 1.0 / np.sqrt(3.0)
# reference-square corner signs, order SW SE NE NW
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of nx*ny rectangular cells on [x0, x1] x [y0, y1]."""

    nx: int
    ny: int
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 cells per direction")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("domain corners must satisfy x1 > x0 and y1 > y0")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_interior(self) -> int:
        return (self.nx - 1) * (self.ny - 1)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass
class DensityField:
    """Cell-wise coefficient field, the design variable."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise ValueError("values must hold one real per cell")

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "DensityField":
        return cls(grid, np.full(grid.n_cells, float(value)))

    def copy(self) -> "DensityField":
        return DensityField(self.grid, self.values.copy())

    def mass(self) -> float:
        return integrate_cells(self.grid, self.values)


@dataclass
class NodalField:
    """Node-wise scalar field; state and adjoint solutions live here."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError("values must hold one real per node")

    @classmethod
    def from_interior(cls, grid: GridSpec, interior: np.ndarray) -> "NodalField":
        """Scatter an interior-node vector onto the full grid, zero boundary."""
        full = np.zeros(grid.n_nodes)
        full[interior_node_ids(grid)] = interior
        return cls(grid, full)

    def interior(self) -> np.ndarray:
        return self.values[interior_node_ids(self.grid)]


@dataclass
class CellVectorField:
    """One 2-vector per cell (gradient samples at cell centers)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells, 2):
            raise ValueError("values must hold one 2-vector per cell")


@lru_cache(maxsize=64)
def cell_node_ids(grid: GridSpec) -> np.ndarray:
    """(n_cells, 4) node indices per cell, corners ordered SW, SE, NE, NW."""
    i = np.arange(grid.nx)
    j = np.arange(grid.ny)
    jj, ii = np.meshgrid(j, i, indexing="ij")
    sw = (jj * (grid.nx + 1) + ii).ravel()
    ids = np.stack([sw, sw + 1, sw + grid.nx + 2, sw + grid.nx + 1], axis=1)
    ids.flags.writeable = False
    return ids


@lru_cache(maxsize=64)
def interior_node_ids(grid: GridSpec) -> np.ndarray:
    """Indices of nodes with 0 < i < nx and 0 < j < ny, row-major."""
    i = np.arange(1, grid.nx)
    j = np.arange(1, grid.ny)
    jj, ii = np.meshgrid(j, i, indexing="ij")
    ids = (jj * (grid.nx + 1) + ii).ravel()
    ids.flags.writeable = False
    return ids


@lru_cache(maxsize=64)
def _interior_index_map(grid: GridSpec) -> np.ndarray:
    """Full node index -> interior index, -1 for boundary nodes."""
    m = np.full(grid.n_nodes, -1, dtype=np.int64)
    m[interior_node_ids(grid)] = np.arange(grid.n_interior)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=64)
def boundary_node_ids(grid: GridSpec) -> np.ndarray:
    mask = np.ones(grid.n_nodes, dtype=bool)
    mask[interior_node_ids(grid)] = False
    ids = np.nonzero(mask)[0]
    ids.flags.writeable = False
    return ids


@lru_cache(maxsize=64)
def node_coords(grid: GridSpec) -> np.ndarray:
    x = np.linspace(grid.x0, grid.x1, grid.nx + 1)
    y = np.linspace(grid.y0, grid.y1, grid.ny + 1)
    yy, xx = np.meshgrid(y, x, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts.flags.writeable = False
    return pts


@lru_cache(maxsize=64)
def cell_centers(grid: GridSpec) -> np.ndarray:
    cx = grid.x0 + (np.arange(grid.nx) + 0.5) * grid.hx
    cy = grid.y0 + (np.arange(grid.ny) + 0.5) * grid.hy
    yy, xx = np.meshgrid(cy, cx, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts.flags.writeable = False
    return pts


@lru_cache(maxsize=64)
def reference_stiffness(hx: float, hy: float) -> np.ndarray:
    """4x4 element stiffness for a unit coefficient on an hx-by-hy cell.

    2x2 Gauss quadrature, exact for the bilinear basis on rectangles.
    """
    K = np.zeros((4, 4))
    det_j = hx * hy / 4.0
    for gx in (-_GAUSS, _GAUSS):
        for gy in (-_GAUSS, _GAUSS):
            dndx = _XI * (1.0 + _ETA * gy) / 4.0 * (2.0 / hx)
            dndy = _ETA * (1.0 + _XI * gx) / 4.0 * (2.0 / hy)
            K += (np.outer(dndx, dndx) + np.outer(dndy, dndy)) * det_j
    K.flags.writeable = False
    return K


def assemble_stiffness(a: DensityField) -> SparseSpdMatrix:
    """Assemble the interior-node stiffness matrix of -div(a grad u).

    The coefficient is held constant per cell; boundary rows and columns are
    eliminated (homogeneous Dirichlet).
    """
    if np.any(a.values <= 0.0):
        raise ValueError("coefficient values must be strictly positive")
    grid = a.grid
    cells = cell_node_ids(grid)
    kref = reference_stiffness(grid.hx, grid.hy)
    imap = _interior_index_map(grid)

    li, lj = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    rows = imap[cells[:, li.ravel()]]
    cols = imap[cells[:, lj.ravel()]]
    vals = a.values[:, None] * kref.ravel()[None, :]

    keep = (rows >= 0) & (cols >= 0)
    return SparseSpdMatrix.from_coo(
        grid.n_interior, rows[keep], cols[keep], vals[keep]
    )


def assemble_load(grid: GridSpec, g_cells: np.ndarray) -> np.ndarray:
    """Interior load vector for a source held constant per cell.

    Each cell spreads g_c * cell_area / 4 to its four corner nodes, the exact
    integral of the bilinear basis against a cell-wise constant.
    """
    g_cells = np.asarray(g_cells, dtype=float)
    if g_cells.shape != (grid.n_cells,):
        raise ValueError("load must hold one real per cell")
    contrib = g_cells * (grid.cell_area / 4.0)
    nodal = np.zeros(grid.n_nodes)
    np.add.at(nodal, cell_node_ids(grid).ravel(), np.repeat(contrib, 4))
    return nodal[interior_node_ids(grid)]


def cell_gradients(u: NodalField) -> CellVectorField:
    """Gradient of the bilinear interpolant at each cell center."""
    grid = u.grid
    corners = u.values[cell_node_ids(grid)]  # (n_cells, 4): SW SE NE NW
    gx = ((corners[:, 1] + corners[:, 2]) - (corners[:, 0] + corners[:, 3])) / (
        2.0 * grid.hx
    )
    gy = ((corners[:, 3] + corners[:, 2]) - (corners[:, 0] + corners[:, 1])) / (
        2.0 * grid.hy
    )
    return CellVectorField(grid, np.stack([gx, gy], axis=1))


def cell_grad_dot(u: NodalField, p: NodalField) -> np.ndarray:
    """Per-cell mean of grad(u).grad(p), consistent with assembly quadrature.

    Returns (1/|cell|) * integral of grad(u).grad(p) over each cell, so that
    sum_c a_c * area * cell_grad_dot(u, p)_c reproduces the assembled bilinear
    form exactly. This is what makes the descent gradient match finite
    differences of the discrete cost to solver precision.
    """
    grid = u.grid
    if p.grid != grid:
        raise ValueError("fields live on different grids")
    kref = reference_stiffness(grid.hx, grid.hy)
    cu = u.values[cell_node_ids(grid)]
    cp = p.values[cell_node_ids(grid)]
    return np.einsum("ci,ij,cj->c", cu, kref, cp) / grid.cell_area


def stiffness_energy(a: DensityField, u: NodalField) -> float:
    """Discrete energy integral a*|grad u|^2 under assembly quadrature."""
    return float(a.values @ cell_grad_dot(u, u)) * a.grid.cell_area


def cell_averages(u: NodalField) -> np.ndarray:
    """Per-cell average of corner values; exact cell mean of the interpolant."""
    corners = u.values[cell_node_ids(u.grid)]
    return corners.sum(axis=1) / 4.0


def integrate_cells(grid: GridSpec, w: np.ndarray) -> float:
    """Integral over the domain of a cell-wise constant field."""
    w = np.asarray(w, dtype=float)
    if w.shape != (grid.n_cells,):
        raise ValueError("integrand must hold one real per cell")
    return float(np.sum(w)) * grid.cell_area


def l2_error(u: NodalField, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    """L2 norm of (interpolant of u) - fn over the domain, 2x2 Gauss per cell.

    This is a function-space norm: it sees the in-cell interpolation error,
    not just nodal mismatch, so it decays at the order of the element.
    """
    grid = u.grid
    corners = u.values[cell_node_ids(grid)]
    centers = cell_centers(grid)
    total = 0.0
    det_j = grid.cell_area / 4.0
    for gx in (-_GAUSS, _GAUSS):
        for gy in (-_GAUSS, _GAUSS):
            shape = (1.0 + _XI * gx) * (1.0 + _ETA * gy) / 4.0
            uh = corners @ shape
            x = centers[:, 0] + gx * grid.hx / 2.0
            y = centers[:, 1] + gy * grid.hy / 2.0
            diff = uh - np.asarray(fn(x, y), dtype=float)
            total += float(diff @ diff) * det_j
    return float(np.sqrt(total))


def sample_cells(grid: GridSpec, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Sample a function of (x, y) at all cell centers."""
    centers = cell_centers(grid)
    return np.asarray(fn(centers[:, 0], centers[:, 1]), dtype=float)


def sample_nodes(grid: GridSpec, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> NodalField:
    """Sample a function of (x, y) at all nodes."""
    pts = node_coords(grid)
    return NodalField(grid, np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float))
