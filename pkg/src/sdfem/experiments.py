"""Single solves and (N, eps) sweeps shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import (
    ErrorReport,
    ErrorRow,
    NormWeights,
    continuous_error_energy_norm,
    discrete_norms,
    nodal_interpolant,
)
from .assembly import DiscreteField, LinearSystem, assemble_norm_matrices, assemble_system
from .errors import SdfemError
from .linalg import SolveStats, gmres
from .mesh import MeshParams, ShishkinMesh, build_macro_mesh, build_mesh
from .postprocess import postprocess
from .problem import ProblemSpec, eval_exact, get_problem
from .quadrature import triangle_rule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-12
    restart: int = 100
    max_iters: int = 20000
    preconditioner: str = "jacobi"


@dataclass(frozen=True)
class QuadratureDegrees:
    galerkin: int = 4
    rhs: int = 6
    norms: int = 6


@dataclass
class CaseResult:
    mesh: ShishkinMesh
    problem: ProblemSpec
    system: LinearSystem
    solution: np.ndarray  # interior unknowns
    stats: SolveStats
    c_star: float
    quadrature: QuadratureDegrees = QuadratureDegrees()

    @property
    def field(self) -> DiscreteField:
        return self.system.to_field(self.solution)


def solve_case(problem: ProblemSpec, N: int, c_star: float = 1.0, rho: float = 2.5,
               solver: SolverOptions = SolverOptions(),
               quadrature: QuadratureDegrees = QuadratureDegrees()) -> CaseResult:
    problem.check()
    params = MeshParams(N=N, epsilon=problem.epsilon, beta1=problem.beta1,
                        beta2=problem.beta2, rho=rho)
    mesh = build_mesh(params)
    system = assemble_system(mesh, problem, c_star, triangle_rule(quadrature.galerkin),
                             triangle_rule(quadrature.rhs))
    x, stats = gmres(system.A, system.rhs, tol=solver.tol, restart=solver.restart,
                     max_iters=solver.max_iters, preconditioner=solver.preconditioner)
    return CaseResult(mesh, problem, system, x, stats, c_star, quadrature)


def error_row(case: CaseResult, with_postprocess: bool = True) -> ErrorRow:
    mesh, problem = case.mesh, case.problem
    weights = NormWeights.of(problem)
    uN = case.field
    uI = nodal_interpolant(mesh, lambda x, y: eval_exact(problem, x, y)[0])
    mats = assemble_norm_matrices(mesh, problem, case.c_star,
                                  triangle_rule(case.quadrature.galerkin))
    e_energy, e_sd = discrete_norms(uI - uN, mats, weights)
    exact = lambda x, y: eval_exact(problem, x, y)  # noqa: E731
    quad = triangle_rule(case.quadrature.norms)
    err = continuous_error_energy_norm(mesh, exact, uN, weights, quad)
    post = None
    if with_postprocess and mesh.N % 4 == 0:
        macro = build_macro_mesh(mesh)
        post = continuous_error_energy_norm(mesh, exact, postprocess(mesh, macro, uN),
                                            weights, quad)
    return ErrorRow(
        N=mesh.N, epsilon=problem.epsilon,
        err_interp_energy=e_energy, err_interp_sd=e_sd, err_energy=err,
        err_post_energy=post, gmres_iters=case.stats.iterations,
        residual=case.stats.residual,
    )


@dataclass(frozen=True)
class SweepCell:
    problem: str
    N: int
    epsilon: float
    c_star: float = 1.0
    rho: float = 2.5
    solver: SolverOptions = field(default_factory=SolverOptions)
    postprocess: bool = True
    quadrature: QuadratureDegrees = field(default_factory=QuadratureDegrees)


def run_cell(cell: SweepCell) -> ErrorRow:
    """Solve and measure one cell; failures are recorded on the row, not raised."""
    try:
        problem = get_problem(cell.problem, cell.epsilon)
        case = solve_case(problem, cell.N, cell.c_star, cell.rho, cell.solver,
                          cell.quadrature)
        row = error_row(case, cell.postprocess)
        if not case.stats.converged:
            row.failure = f"GMRES not converged (residual {case.stats.residual:.3e})"
        return row
    except SdfemError as exc:
        logger.error("cell N=%d eps=%g failed: %s", cell.N, cell.epsilon, exc)
        return ErrorRow(N=cell.N, epsilon=cell.epsilon, failure=str(exc))


def run_sweep(cells: list, workers: int = 1, meta: Optional[dict] = None) -> ErrorReport:
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    report = ErrorReport(rows=rows, meta=dict(meta or {}))
    report.rows = report.sorted_rows()
    return report
