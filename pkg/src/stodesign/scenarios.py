"""Finite weighted scenario sets for the randomly perturbed right-hand side.

The load is f(x) plus a perturbation that takes finitely many values
xi_k with probabilities w_k. The perturbation must have zero mean,
sum_k w_k * xi_k = 0 cell-wise, so the mean load stays f.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .fem import GridSpec

WEIGHT_SUM_TOL = 1e-12
ZERO_MEAN_TOL = 1e-12
FILE_ZERO_MEAN_TOL = 1e-9  # looser: decimal round-trip noise


@dataclass
class Scenario:
    """One perturbation realization: cell-wise field xi and probability weight."""

    xi: np.ndarray
    weight: float

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"scenario weight must lie in (0, 1], got {self.weight}")


@dataclass
class ScenarioSet:
    """Deterministic load plus a finite list of weighted perturbations."""

    grid: GridSpec
    f: np.ndarray
    scenarios: list[Scenario] = field(default_factory=list)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.grid.n_cells,):
            raise ValueError("f must hold one real per cell")
        for s in self.scenarios:
            if s.xi.shape != self.f.shape:
                raise ValueError("scenario field size does not match the grid")

    def loads(self) -> list[np.ndarray]:
        """Per-scenario total right-hand side f + xi_k."""
        return [self.f + s.xi for s in self.scenarios]

    def weights(self) -> np.ndarray:
        return np.array([s.weight for s in self.scenarios])


def make_deterministic(grid: GridSpec, f_cells: np.ndarray) -> ScenarioSet:
    """Single-scenario set with no perturbation."""
    f = np.asarray(f_cells, dtype=float)
    return ScenarioSet(grid, f, [Scenario(np.zeros(grid.n_cells), 1.0)])


def _require_unit_square(grid: GridSpec):
    if (grid.x0, grid.y0, grid.x1, grid.y1) != (0.0, 0.0, 1.0, 1.0):
        raise ValueError("built-in perturbation cases are defined on the unit square")


@lru_cache(maxsize=64)
def center_square_mask(grid: GridSpec) -> np.ndarray:
    """Cells whose center lies in the middle quarter-area square [1/4,3/4]^2."""
    from .fem import cell_centers

    c = cell_centers(grid)
    mask = (
        (c[:, 0] >= 0.25) & (c[:, 0] <= 0.75) & (c[:, 1] >= 0.25) & (c[:, 1] <= 0.75)
    )
    mask.flags.writeable = False
    return mask


def make_case1(grid: GridSpec) -> ScenarioSet:
    """Unit load with a +-1 perturbation on the center square, weight 1/2 each."""
    _require_unit_square(grid)
    chi = center_square_mask(grid).astype(float)
    f = np.ones(grid.n_cells)
    return ScenarioSet(grid, f, [Scenario(chi, 0.5), Scenario(-chi, 0.5)])


def make_case2(grid: GridSpec) -> ScenarioSet:
    """Unit load with a +-1 perturbation on the complement of the center square."""
    _require_unit_square(grid)
    chi = (~center_square_mask(grid)).astype(float)
    f = np.ones(grid.n_cells)
    return ScenarioSet(grid, f, [Scenario(chi, 0.5), Scenario(-chi, 0.5)])


def validate(
    sset: ScenarioSet,
    weight_tol: float = WEIGHT_SUM_TOL,
    mean_tol: float = ZERO_MEAN_TOL,
) -> list[str]:
    """Check the probability-sum and zero-mean invariants.

    Returns a list of violation messages; an empty list means the set is valid.
    Violations are data, not exceptions.
    """
    violations = []
    if not sset.scenarios:
        violations.append("scenario set is empty")
        return violations
    wsum = float(sum(s.weight for s in sset.scenarios))
    if abs(wsum - 1.0) > weight_tol:
        violations.append(f"weights sum to {wsum!r}, expected 1 within {weight_tol}")
    mean = np.zeros(sset.grid.n_cells)
    for s in sset.scenarios:
        mean += s.weight * s.xi
    worst = float(np.max(np.abs(mean))) if mean.size else 0.0
    if worst > mean_tol:
        violations.append(
            f"perturbation mean reaches {worst:.3e}, expected 0 within {mean_tol}"
        )
    return violations


def save_scenario_file(sset: ScenarioSet, path: str | Path) -> None:
    """Write a scenario set as whitespace-separated text.

    Layout: a `grid nx ny` line, an `f` line followed by nx*ny cell values
    (row-major, one line per cell row), then for each scenario a
    `scenario <weight>` line followed by its cell values. Lines starting
    with '#' are comments.
    """
    grid = sset.grid
    lines = [f"grid {grid.nx} {grid.ny}", "f"]
    lines += _format_cell_rows(grid, sset.f)
    for s in sset.scenarios:
        lines.append(f"scenario {float(s.weight)!r}")
        lines += _format_cell_rows(grid, s.xi)
    Path(path).write_text("\n".join(lines) + "\n")


def _format_cell_rows(grid: GridSpec, values: np.ndarray) -> list[str]:
    rows = values.reshape(grid.ny, grid.nx)
    return [" ".join(repr(float(v)) for v in row) for row in rows]


def load_scenario_file(path: str | Path) -> ScenarioSet:
    """Read a scenario set written by save_scenario_file.

    The zero-mean property is enforced at load time with a tolerance of
    1e-9; the tiny residual mean left by decimal round-trip is subtracted
    so downstream validation at the strict tolerance passes.
    """
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    pos = 0

    def take(n: int) -> list[str]:
        nonlocal pos
        if pos + n > len(tokens):
            raise ValueError(f"scenario file {path} ended unexpectedly")
        out = tokens[pos : pos + n]
        pos += n
        return out

    kw = take(1)[0]
    if kw != "grid":
        raise ValueError(f"scenario file must start with 'grid', got {kw!r}")
    nx, ny = (int(t) for t in take(2))
    grid = GridSpec(nx, ny)
    n_cells = grid.n_cells

    if take(1)[0] != "f":
        raise ValueError("expected 'f' section after the grid line")
    f = np.array([float(t) for t in take(n_cells)])

    scenarios = []
    while pos < len(tokens):
        if take(1)[0] != "scenario":
            raise ValueError("expected 'scenario <weight>' section")
        weight = float(take(1)[0])
        xi = np.array([float(t) for t in take(n_cells)])
        scenarios.append(Scenario(xi, weight))
    if not scenarios:
        raise ValueError("scenario file declares no scenarios")

    sset = ScenarioSet(grid, f, scenarios)
    problems = validate(sset, mean_tol=FILE_ZERO_MEAN_TOL, weight_tol=FILE_ZERO_MEAN_TOL)
    if problems:
        raise ValueError(f"invalid scenario file {path}: " + "; ".join(problems))

    # remove round-trip residue so the strict in-memory invariants hold
    wsum = float(sum(s.weight for s in sset.scenarios))
    if wsum != 1.0:
        for s in sset.scenarios:
            s.weight = s.weight / wsum
    residual = np.zeros(n_cells)
    for s in sset.scenarios:
        residual += s.weight * s.xi
    if np.any(residual != 0.0):
        for s in sset.scenarios:
            s.xi = s.xi - residual
    return sset
