"""State and adjoint solves per scenario.

The stiffness matrix depends only on the coefficient field, so it is
assembled once and reused across scenarios. For the two supported cost
kinds the adjoint solution is a signed copy of the state (p = u for
compliance, p = -u for energy), never a second linear solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cg import SolveReport, cg_solve
from .fem import (
    CellVectorField,
    DensityField,
    NodalField,
    assemble_load,
    assemble_stiffness,
    cell_gradients,
)
from .objective import Objective
from .scenarios import ScenarioSet, validate


@dataclass
class ScenarioSolution:
    """State/adjoint pair and gradients for one scenario.

    `load` is the per-cell right-hand side f + xi_k, kept so cost evaluation
    does not need the scenario set again. `u_interior` is the raw solver
    vector, useful as a warm start for nearby coefficient fields.
    """

    u: NodalField
    grad_u: CellVectorField
    weight: float
    load: np.ndarray
    u_interior: np.ndarray
    solve_tol: float
    report: SolveReport
    p: NodalField | None = None
    grad_p: CellVectorField | None = None


def solve_state(
    a: DensityField,
    sset: ScenarioSet,
    tol: float = 1e-10,
    max_iter: int | None = None,
    warm_starts: list[np.ndarray] | None = None,
) -> list[ScenarioSolution]:
    """Solve the state equation for every scenario of the set.

    Raises RuntimeError naming the scenario if CG does not converge.
    """
    problems = validate(sset)
    if problems:
        raise ValueError("invalid scenario set: " + "; ".join(problems))
    grid = a.grid
    if sset.grid != grid:
        raise ValueError("scenario set and coefficient live on different grids")

    K = assemble_stiffness(a)
    solutions = []
    for k, scenario in enumerate(sset.scenarios):
        load = sset.f + scenario.xi
        b = assemble_load(grid, load)
        x0 = warm_starts[k] if warm_starts is not None else None
        x, report = cg_solve(K, b, tol=tol, max_iter=max_iter, x0=x0)
        if not report.converged:
            raise RuntimeError(
                f"CG did not converge for scenario {k} "
                f"(relative residual {report.relative_residual:.3e} "
                f"after {report.iterations} iterations)"
            )
        u = NodalField.from_interior(grid, x)
        solutions.append(
            ScenarioSolution(
                u=u,
                grad_u=cell_gradients(u),
                weight=scenario.weight,
                load=load,
                u_interior=x,
                solve_tol=tol,
                report=report,
            )
        )
    return solutions


def attach_adjoint(solutions: list[ScenarioSolution], kind: Objective) -> list[ScenarioSolution]:
    """Fill the adjoint parts by sign-reuse of the state solution."""
    sign = 1.0 if kind is Objective.COMPLIANCE else -1.0
    for sol in solutions:
        grid = sol.u.grid
        sol.p = NodalField(grid, sign * sol.u.values)
        sol.grad_p = CellVectorField(grid, sign * sol.grad_u.values)
    return solutions


def solve_adjoint(
    a: DensityField,
    sset: ScenarioSet,
    kind: Objective,
    tol: float = 1e-10,
    max_iter: int | None = None,
    states: list[ScenarioSolution] | None = None,
) -> list[ScenarioSolution]:
    """State plus adjoint bundles for every scenario.

    Pass precomputed `states` to avoid re-solving; otherwise one state solve
    per scenario is performed and the adjoint is attached by sign.
    """
    if states is None:
        states = solve_state(a, sset, tol=tol, max_iter=max_iter)
    return attach_adjoint(states, kind)
