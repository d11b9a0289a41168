"""Run configuration: a JSON file plus command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError
from .experiments import QuadratureDegrees, SolverOptions, SweepCell
from .problem import PROBLEMS, get_problem


@dataclass(frozen=True)
class RunConfig:
    problem: str = "outflow-layers"
    epsilons: tuple = (1e-8,)
    Ns: tuple = (8, 16, 32, 64, 128, 256)
    c_star: float = 1.0
    rho: float = 2.5
    solver: SolverOptions = field(default_factory=SolverOptions)
    enable_postprocess: bool = True
    out: str = "."
    format: str = "csv"
    threads: int = 1
    quadrature: QuadratureDegrees = field(default_factory=QuadratureDegrees)

    def validate(self, need_rates: bool = False) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if not self.epsilons or any(not (e > 0) for e in self.epsilons):
            raise ConfigurationError("epsilons must be a non-empty list of positive numbers")
        if not self.Ns:
            raise ConfigurationError("N list is empty")
        for N in self.Ns:
            if int(N) != N or N < 4 or N % 2:
                raise ConfigurationError(f"N must be an even integer >= 4, got {N}")
            if self.enable_postprocess and N % 4:
                raise ConfigurationError(f"postprocessing needs N divisible by 4, got {N}")
        if need_rates:
            for a, b in zip(self.Ns[:-1], self.Ns[1:]):
                if b != 2 * a:
                    raise ConfigurationError("N list must double from entry to entry")
        if not (self.c_star >= 0 and self.rho > 0):
            raise ConfigurationError("c_star must be >= 0 and rho > 0")
        s = self.solver
        if not (s.tol > 0 and s.restart >= 1 and s.max_iters >= 1):
            raise ConfigurationError("solver tol, restart and max_iters must be positive")
        if s.preconditioner not in ("none", "jacobi"):
            raise ConfigurationError(f"unknown preconditioner {s.preconditioner!r}")
        if self.format not in ("csv", "markdown"):
            raise ConfigurationError("format must be 'csv' or 'markdown'")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        q = self.quadrature
        if q.norms < 6:
            raise ConfigurationError("norm quadrature degree must be at least 6")
        if q.galerkin < 1 or q.rhs < 1:
            raise ConfigurationError("quadrature degrees must be positive")
        return self

    def cells(self) -> list:
        return [SweepCell(self.problem, int(N), float(eps), self.c_star, self.rho,
                          self.solver, self.enable_postprocess, self.quadrature)
                for eps in self.epsilons for N in self.Ns]

    def meta(self) -> dict:
        """Header recorded with every report (no timestamps: output must be reproducible)."""
        return {
            "problem": self.problem, "c_star": self.c_star, "rho": self.rho,
            "mu0": get_problem(self.problem, self.epsilons[0]).mu0,
            "tol": self.solver.tol, "restart": self.solver.restart,
            "preconditioner": self.solver.preconditioner,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilons"] = list(self.epsilons)
        d["Ns"] = list(self.Ns)
        return d


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown {where} keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    try:
        if "solver" in data:
            data["solver"] = _build(SolverOptions, data["solver"], "solver")
        if "quadrature" in data:
            data["quadrature"] = _build(QuadratureDegrees, data["quadrature"], "quadrature")
        for key in ("epsilons", "Ns"):
            if key in data:
                data[key] = tuple(data[key])
        return _build(RunConfig, data, "config")
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("config file must contain a JSON object")
    return config_from_dict(data)


def apply_overrides(cfg: RunConfig, N=None, eps=None, cstar=None, tol=None, post=None,
                    out=None, fmt=None, threads=None, restart=None) -> RunConfig:
    changes = {}
    if N is not None:
        changes["Ns"] = tuple(N)
    if eps is not None:
        changes["epsilons"] = tuple(eps)
    if cstar is not None:
        changes["c_star"] = cstar
    if post is not None:
        changes["enable_postprocess"] = post
    if out is not None:
        changes["out"] = out
    if fmt is not None:
        changes["format"] = fmt
    if threads is not None:
        changes["threads"] = threads
    solver = cfg.solver
    if tol is not None:
        solver = replace(solver, tol=tol)
    if restart is not None:
        solver = replace(solver, restart=restart)
    changes["solver"] = solver
    return replace(cfg, **changes)
