"""Command-line driver: single solves, convergence sweeps, verification suites
and the acceptance run.

Exit codes: 0 success, 1 solver failure, 2 configuration error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import scipy.io

from . import acceptance, verify
from .analysis import verify_orthogonality
from .config import RunConfig, apply_overrides, load_config
from .errors import ConfigurationError, SdfemError
from .experiments import run_sweep, solve_case
from .problem import get_problem

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3

logger = logging.getLogger("sdfem")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--N", type=int, nargs="+", help="mesh sizes (override config)")
    common.add_argument("--eps", type=float, nargs="+", help="epsilon values (override config)")
    common.add_argument("--cstar", type=float, help="stabilization constant C*")
    common.add_argument("--tol", type=float, help="GMRES relative residual tolerance")
    common.add_argument("--restart", type=int, help="GMRES restart length")
    common.add_argument("--post", type=_parse_bool, metavar="BOOL",
                        help="enable postprocessing (true/false)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=["csv", "markdown"], help="table format on stdout")
    common.add_argument("--threads", type=int, help="parallel worker processes for sweep cells")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sdfem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve one (N, eps) case")
    p.add_argument("--dump-matrix", metavar="PATH", help="write A in MatrixMarket format")
    sub.add_parser("converge", parents=[common], help="error/rate table over N and eps")
    p = sub.add_parser("verify", parents=[common], help="run the numerical property suites")
    p.add_argument("--suite", action="append", choices=sorted(verify.SUITES),
                   help="run only this suite (repeatable)")
    sub.add_parser("acceptance", parents=[common], help="run every acceptance criterion")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return apply_overrides(cfg, N=args.N, eps=args.eps, cstar=args.cstar, tol=args.tol,
                           post=args.post, out=args.out, fmt=args.format,
                           threads=args.threads, restart=args.restart)


def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_solve(cfg: RunConfig, dump_matrix=None) -> int:
    if len(cfg.Ns) != 1 or len(cfg.epsilons) != 1:
        raise ConfigurationError("solve needs exactly one N and one epsilon")
    cfg.validate()
    problem = get_problem(cfg.problem, cfg.epsilons[0])
    case = solve_case(problem, cfg.Ns[0], cfg.c_star, cfg.rho, cfg.solver, cfg.quadrature)
    out = _outdir(cfg)
    mesh, fld = case.mesh, case.field
    ids = np.arange(mesh.n_nodes)
    np.savetxt(out / "solution.csv", np.column_stack([ids, mesh.node_x, mesh.node_y, fld.values]),
               delimiter=",", header="id,x,y,value", comments="", fmt=["%d", "%.17g", "%.17g", "%.17g"])
    stats = case.stats
    record = {
        "N": mesh.N, "epsilon": problem.epsilon, "c_star": cfg.c_star,
        "unknowns": case.system.size, "iterations": stats.iterations,
        "residual": stats.residual, "orthogonality": verify_orthogonality(case.system, case.solution),
        "converged": stats.converged, "restarts": stats.restarts,
        "partial": not stats.converged,
    }
    (out / "stats.json").write_text(json.dumps(record, indent=2) + "\n")
    if dump_matrix:
        scipy.io.mmwrite(dump_matrix, case.system.A.to_scipy())
    print(json.dumps(record))
    return EXIT_OK if stats.converged else EXIT_SOLVER


def _write_report(report, cfg: RunConfig, stem: str = "errors") -> None:
    out = _outdir(cfg)
    csv_text, md_text = report.to_csv(), report.to_markdown()
    (out / f"{stem}.csv").write_text(csv_text)
    (out / f"{stem}.md").write_text(md_text)
    sys.stdout.write(csv_text if cfg.format == "csv" else md_text)


def cmd_converge(cfg: RunConfig) -> int:
    cfg.validate(need_rates=True)
    report = run_sweep(cfg.cells(), workers=cfg.threads, meta=cfg.meta())
    _write_report(report, cfg)
    failed = [r for r in report.rows if r.failure]
    for r in failed:
        logger.error("N=%d eps=%g: %s", r.N, r.epsilon, r.failure)
    return EXIT_SOLVER if failed else EXIT_OK


def _print_suites(results) -> None:
    for r in results:
        print(r.line())
        for d in r.details:
            print("    " + d)


def cmd_verify(cfg: RunConfig, only=None) -> int:
    cfg.validate()
    results = verify.run_all(cfg.problem, cfg.c_star, only)
    _print_suites(results)
    record = [{"name": r.name, "passed": r.passed, "value": r.value, "details": r.details}
              for r in results]
    (_outdir(cfg) / "verify.json").write_text(json.dumps(record, indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_acceptance(cfg: RunConfig) -> int:
    start = time.perf_counter()
    cfg.validate(need_rates=True)
    report = run_sweep(cfg.cells(), workers=cfg.threads, meta=cfg.meta())
    out = _outdir(cfg)
    (out / "errors.csv").write_text(report.to_csv())
    (out / "errors.md").write_text(report.to_markdown())
    suites = verify.run_all(cfg.problem, cfg.c_star)
    results = acceptance.evaluate_sweep(report)
    results.append(acceptance.criterion_properties(suites, report))
    results.append(acceptance.criterion_runtime(time.perf_counter() - start))
    for r in results:
        print(r.line())
        for d in r.details:
            print("    " + d)
    (out / "acceptance.json").write_text(json.dumps(
        [{"criterion": r.number, "title": r.title, "passed": r.passed, "details": r.details}
         for r in results], indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("verify", "acceptance") and not args.verbose:
        # the norm oracle deliberately uses clamped (uniform) meshes
        logging.getLogger("sdfem.mesh").setLevel(logging.ERROR)
    try:
        cfg = _config(args)
        if args.command == "solve":
            return cmd_solve(cfg, args.dump_matrix)
        if args.command == "converge":
            return cmd_converge(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        return cmd_acceptance(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SdfemError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
