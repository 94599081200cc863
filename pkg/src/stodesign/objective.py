"""Expected cost, penalized cost and the descent gradient density.

The expectation over scenarios is an exact weighted sum; nothing is sampled.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .cg import cg_solve
from .fem import (
    DensityField,
    GridSpec,
    NodalField,
    assemble_load,
    assemble_stiffness,
    cell_averages,
    cell_grad_dot,
    integrate_cells,
    stiffness_energy,
)
from .scenarios import ScenarioSet, validate

if TYPE_CHECKING:
    from .solve import ScenarioSolution


class Objective(enum.Enum):
    """Cost kind: compliance pairs the load with u, energy is its negation."""

    COMPLIANCE = "compliance"
    ENERGY = "energy"

    @classmethod
    def parse(cls, name: str) -> "Objective":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown objective {name!r}; expected 'compliance' or 'energy'"
            ) from None

    @property
    def sign(self) -> float:
        return 1.0 if self is Objective.COMPLIANCE else -1.0


@dataclass
class GradientDensity:
    """Cell-wise expected grad(u).grad(p), the driver of the descent step."""

    grid: GridSpec
    values: np.ndarray


def _pairing(sol: "ScenarioSolution") -> float:
    """Integral of (f + xi) * u over the domain for one scenario."""
    area = sol.u.grid.cell_area
    return float(sol.load @ cell_averages(sol.u)) * area


def cost(a: DensityField, sols: list["ScenarioSolution"], kind: Objective) -> float:
    """Expected cost over scenarios.

    Compliance is sum_k w_k * integral (f + xi_k) u_k; energy is its negation.
    The load-pairing value is cross-checked against the stiffness-energy form
    sum_k w_k * integral a |grad u_k|^2, which must agree within 10x the solver
    tolerance; a larger gap indicates an assembly or bookkeeping bug.
    """
    pairing = sum(sol.weight * _pairing(sol) for sol in sols)
    energy = sum(sol.weight * stiffness_energy(a, sol.u) for sol in sols)
    tol = 10.0 * max(sol.solve_tol for sol in sols)
    gap = abs(pairing - energy)
    if gap > tol * max(abs(pairing), abs(energy)) + 1e-14:
        raise ArithmeticError(
            f"load-pairing cost {pairing!r} and stiffness-energy cost {energy!r} "
            f"disagree by {gap:.3e}; assembly and solutions are inconsistent"
        )
    return kind.sign * pairing


def penalized_cost(
    a: DensityField,
    sols: list["ScenarioSolution"],
    kind: Objective,
    gamma_pen: float,
) -> float:
    """Cost plus gamma_pen times the design mass."""
    if gamma_pen < 0.0:
        raise ValueError("gamma_pen must be nonnegative")
    return cost(a, sols, kind) + gamma_pen * integrate_cells(a.grid, a.values)


def gradient_density(sols: list["ScenarioSolution"]) -> GradientDensity:
    """Cell-wise expected grad(u).grad(p).

    Uses the same 2x2 Gauss quadrature as the stiffness assembly (per-cell
    mean of the product), so that the directional derivative of the discrete
    cost along a cell indicator is exactly -area * g_c.
    """
    if not sols:
        raise ValueError("no scenario solutions given")
    grid = sols[0].u.grid
    g = np.zeros(grid.n_cells)
    for sol in sols:
        if sol.p is None:
            raise ValueError("adjoint part missing; solve the adjoint first")
        g += sol.weight * cell_grad_dot(sol.u, sol.p)
    return GradientDensity(grid, g)


def expected_decomposition_check(
    a: DensityField,
    sset: ScenarioSet,
    tol: float = 1e-10,
) -> tuple[float, float]:
    """Linearity identity used as a test oracle.

    Returns (lhs, rhs) where lhs is the expected compliance of f + xi and
    rhs = compliance(f) + sum_k w_k * integral xi_k u(xi_k), with u(xi_k)
    solving the state equation under the perturbation alone. With zero-mean
    perturbations the cross terms cancel and both sides agree up to solver
    error.
    """
    problems = validate(sset)
    if problems:
        raise ValueError("invalid scenario set: " + "; ".join(problems))
    grid = a.grid
    K = assemble_stiffness(a)
    area = grid.cell_area

    def compliance_of(load: np.ndarray) -> float:
        b = assemble_load(grid, load)
        x, report = cg_solve(K, b, tol=tol)
        if not report.converged:
            raise RuntimeError("CG did not converge in decomposition check")
        u = NodalField.from_interior(grid, x)
        return float(load @ cell_averages(u)) * area

    lhs = sum(s.weight * compliance_of(sset.f + s.xi) for s in sset.scenarios)
    rhs = compliance_of(sset.f) + sum(
        s.weight * compliance_of(s.xi) if np.any(s.xi != 0.0) else 0.0
        for s in sset.scenarios
    )
    return lhs, rhs
