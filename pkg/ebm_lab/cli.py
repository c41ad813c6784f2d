"""
Command-line front end.

    python -m ebm_lab [global flags] <command> [command flags]

Commands: solve, simulate, verify, bifurcate, stability, greenfn-table.
Every command writes its files into --out-dir and finishes with
manifest.json. Exit codes: 0 success, 2 configuration error, 3 unresolved
reference, 4 numerical failure (or a verification order below 1.7).
"""

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ebm_lab import bifurcation, bim, fdm, stability
from ebm_lab.errors import (
    ConfigError,
    EBMError,
    InvalidGeometryError,
    InvalidParameterError,
    UnresolvedReferenceError,
)
from ebm_lab.cases import find_case
from ebm_lab.greenfn import green_K, green_K_dtheta, kernel_for
from ebm_lab.io import (
    RunManifest,
    read_profile_csv,
    resolve_config,
    utc_now,
    write_csv,
    write_json,
    write_manifest,
    write_profile,
)
from ebm_lab.params import PRESETS, RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REFERENCE = 3
EXIT_NUMERIC = 4
MIN_ORDER = 1.7
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _env_threads() -> int:
    """EBM_THREADS as a positive int, 1 when unset.

    Raises:
        ConfigError: If the variable is not a positive integer.
    """
    raw = os.environ.get("EBM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ConfigError("invalid environment", [f"EBM_THREADS: {raw!r} is not a positive integer"])
    return value


class _Run:
    """Per-invocation context shared by the command handlers."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]) -> None:
        self.args = args
        self.config: RunConfig = resolve_config(args.config, args.preset)
        self.out_dir = Path(args.out_dir)
        self.threads = args.threads or _env_threads()
        self.files: List[Path] = []
        self.notes: List[str] = []
        self.exit_code = EXIT_OK
        self.manifest = RunManifest(
            command=args.command,
            argv=list(argv),
            config=self.config.model_dump(mode="json"),
            started_at=utc_now(),
            tolerances={"newton_tol": args.tol, "seed_density": float(args.seed_density)},
        )

    def finish(self) -> None:
        manifest = self.manifest.model_copy(update={"notes": self.notes})
        write_manifest(self.out_dir, manifest, self.files)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _equilibria(
    run: _Run, Q: float, cases: Optional[List[str]] = None, jacobian: str = "central"
) -> List[bim.StationarySolution]:
    return bim.enumerate_equilibria(
        Q,
        run.config,
        seed_density=run.args.seed_density,
        tol=run.args.tol,
        jacobian=jacobian,
        cases=cases,
        threads=run.threads,
    )


def _find_solution(run: _Run, Q: float, solution_id: str) -> bim.StationarySolution:
    pattern = solution_id.rsplit("-", 1)[0]
    for solution in _equilibria(run, Q, cases=[pattern]):
        if solution.id == solution_id:
            return solution
    raise UnresolvedReferenceError(f"no equilibrium {solution_id!r} at Q={Q}")


def cmd_solve(run: _Run) -> None:
    args = run.args
    Q = args.Q if args.Q is not None else run.config.Q
    for name in args.case or []:
        if find_case(run.config.continent, name) is None:
            raise UnresolvedReferenceError(f"no ice pattern {name!r} for a {run.config.continent.kind} geometry")
    solutions = _equilibria(run, Q, args.case, args.jacobian)
    summary = []
    for s in solutions:
        T_mean = bifurcation.mean_temperature(s, run.config.physical)
        run.files += write_profile(run.out_dir, s, run.config.physical.T_s, T_mean)
        summary.append({"id": s.id, "case": s.case.ice_pattern, "theta_c": s.theta_c, "T_mean_C": T_mean})
    if not solutions:
        run.notes.append(f"no equilibria found at Q={Q}")
    run.files.append(write_json(run.out_dir / "equilibria.json", {"Q": Q, "equilibria": summary}))
    logger.info("solve: %d equilibria at Q=%.3f", len(solutions), Q)


def _initial_condition(run: _Run, ic: str, grid: fdm.Grid, Q: float) -> np.ndarray:
    kind, _, value = ic.partition(":")
    if kind == "uniform":
        try:
            return np.full(grid.N + 1, float(value))
        except ValueError:
            raise ConfigError("bad initial condition", [f"ic: {ic!r} is not uniform:<number>"])
    if kind == "equilibrium":
        solution = _find_solution(run, Q, value)
        return bim.sample_solution(solution, grid.theta, run.config.with_Q(Q))
    path = Path(value if kind == "file" else ic)
    if not path.is_file():
        raise UnresolvedReferenceError(f"initial-condition file {path} does not exist")
    columns = read_profile_csv(path)
    theta = columns.get("theta_rad")
    T = columns.get("T_dimensionless", columns.get("T"))
    if theta is None or T is None:
        raise ConfigError("bad initial-condition file", [f"{path}: needs theta_rad and T_dimensionless columns"])
    return np.interp(grid.theta, theta, T)


def cmd_simulate(run: _Run) -> None:
    args = run.args
    Q = args.Q if args.Q is not None else run.config.Q
    config = run.config.with_Q(Q)
    grid = fdm.Grid(args.N)
    T0 = _initial_condition(run, args.ic, grid, Q)
    times = np.linspace(0.0, args.t_end, args.samples) if args.t_end > 0 else [0.0]
    traj = fdm.integrate(
        fdm.SimulationState(grid, 0.0, T0), args.t_end, config,
        method=args.method, t_eval=times, albedo=args.albedo,
    )
    rows = ((t, th, T) for t, profile in zip(traj.t, traj.T) for th, T in zip(grid.theta, profile))
    run.files.append(write_csv(run.out_dir / "trajectory.csv", ["t", "theta_rad", "T"], rows))


def cmd_verify(run: _Run) -> None:
    args = run.args
    table: Dict[str, dict] = {}
    for which in sorted(fdm.EXACT_SOLUTIONS):
        reports = [fdm.artificial_source_run(which, N, args.t_end) for N in sorted(args.N)]
        order = fdm.convergence_order(reports)
        table[which] = {"rows": reports, "order_estimate": order}
        if order is not None and order < MIN_ORDER:
            run.notes.append(f"{which}: observed order {order:.3f} below {MIN_ORDER}")
            run.exit_code = EXIT_NUMERIC
    run.files.append(write_json(run.out_dir / "verify.json", {"t_end": args.t_end, "sources": table}))


def cmd_bifurcate(run: _Run) -> None:
    args = run.args
    n_steps = int(round((args.Q_max - args.Q_min) / args.step)) + 1
    diagram = bifurcation.sweep(
        run.config, args.Q_min, args.Q_max, n_steps,
        seed_density=args.seed_density, threads=run.threads, N=args.N,
    )
    run.files.append(
        write_csv(
            run.out_dir / "diagram.csv",
            ["Q", "T_mean_C", "case", "stability", "n_critical_latitudes"],
            ((p.Q, p.T_mean, p.case, p.stability, p.n_critical) for p in diagram.points),
        )
    )
    run.files.append(
        write_csv(
            run.out_dir / "folds.csv",
            ["branch_id", "Q_fold", "T_mean_fold"],
            ((f.branch_id, f.Q_fold, f.T_mean_fold) for f in diagram.folds),
        )
    )
    for Q, reason in sorted(diagram.failures.items()):
        run.notes.append(f"Q={Q}: {reason}")


def cmd_stability(run: _Run) -> None:
    args = run.args
    Q = args.Q if args.Q is not None else run.config.Q
    solution = _find_solution(run, Q, args.solution_id)
    if args.method == "slope":
        report = _slope_report(run, solution)
    else:
        report = stability.classify_solution(solution, run.config, args.method, args.N)
    run.files.append(write_json(run.out_dir / "stability.json", report))
    if report.eig_spectrum is not None:
        spectrum = report.eig_spectrum
        run.files.append(write_csv(run.out_dir / "spectrum.csv", ["re", "im"], zip(spectrum.real, spectrum.imag)))


def _slope_report(run: _Run, solution: bim.StationarySolution) -> stability.StabilityReport:
    step = run.args.step
    diagram = bifurcation.sweep(
        run.config, solution.Q - 2 * step, solution.Q + 2 * step, 5,
        seed_density=run.args.seed_density, classify=False,
        cases=[solution.case.ice_pattern],
    )
    target = tuple(float(x) for x in solution.theta_c)
    best = None
    for branch in diagram.branches:
        for i, point in enumerate(branch.points):
            if math.isclose(point.Q, solution.Q) and len(point.theta_c) == len(target):
                gap = max((abs(a - b) for a, b in zip(point.theta_c, target)), default=0.0)
                if best is None or gap < best[0]:
                    best = (gap, branch, i)
    if best is None or len(best[1].points) < 3:
        verdict, verdicts = "inconclusive", []
    else:
        verdicts = stability.slope_classify(best[1].points)
        verdict = verdicts[best[2]]
    return stability.StabilityReport(
        method="slope",
        verdict=verdict,
        details={"branch_verdicts": verdicts, "step": step},
    )


def cmd_greenfn_table(run: _Run) -> None:
    """K and its one-sided θ-derivatives on an interior (θ, ξ) grid, diagonal included."""
    args = run.args
    if args.points < 3:
        raise InvalidParameterError(f"--points must be at least 3, got {args.points}")
    kernel = kernel_for(run.config.dimensionless().beta)
    nodes = np.linspace(0.0, math.pi, args.points)[1:-1]
    theta, xi = (a.ravel() for a in np.meshgrid(nodes, nodes, indexing="ij"))
    columns = [
        theta,
        xi,
        green_K(theta, xi, kernel),
        green_K_dtheta(theta, xi, "left", kernel),
        green_K_dtheta(theta, xi, "right", kernel),
    ]
    header = ["theta_rad", "xi_rad", "K", "dK_left", "dK_right"]
    run.files.append(write_csv(run.out_dir / "greenfn.csv", header, zip(*columns)))
    run.notes.append(f"beta={kernel.beta!r} lambda={kernel.degree.lam!r}")


COMMANDS: Dict[str, Callable[[_Run], None]] = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "bifurcate": cmd_bifurcate,
    "stability": cmd_stability,
    "greenfn-table": cmd_greenfn_table,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ebm_lab", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named configuration")
    parser.add_argument("--out-dir", default="out", help="output directory (default: out)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (fallback: EBM_THREADS)")
    parser.add_argument("--seed-density", type=int, default=8, help="Newton seeds per critical latitude")
    parser.add_argument("--tol", type=float, default=bim.DEFAULT_TOL, help="Newton residual tolerance")
    parser.add_argument("--log-level", default=None, help="logging level (fallback: EBM_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="find all equilibria at one Q")
    p.add_argument("--Q", type=float, default=None)
    p.add_argument("--case", action="append", help="restrict to an ice pattern (repeatable)")
    p.add_argument("--jacobian", default="central", choices=("central", "analytic"))

    p = sub.add_parser("simulate", help="integrate the time-dependent model")
    p.add_argument("--Q", type=float, default=None)
    p.add_argument("--ic", required=True, help="uniform:<T>, equilibrium:<id>, file:<csv> or <csv>")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--samples", type=int, default=11)
    p.add_argument("--method", default="RK45", choices=fdm.EXPLICIT_METHODS)
    p.add_argument("--albedo", default="smooth", choices=("smooth", "step"))

    p = sub.add_parser("verify", help="artificial-source convergence study")
    p.add_argument("--N", type=int, nargs="+", default=[100, 200, 400])
    p.add_argument("--t-end", type=float, default=2.0)

    p = sub.add_parser("bifurcate", help="sweep Q and build the bifurcation diagram")
    p.add_argument("--Q-min", type=float, default=240.0)
    p.add_argument("--Q-max", type=float, default=320.0)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--N", type=int, default=200)

    p = sub.add_parser("stability", help="classify one equilibrium")
    p.add_argument("--Q", type=float, default=None)
    p.add_argument("--solution-id", required=True)
    p.add_argument("--method", default="eigen", choices=("eigen", "slope", "heuristic"))
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--step", type=float, default=0.5, help="Q step of the slope method's local sweep")

    p = sub.add_parser("greenfn-table", help="tabulate the kernel on a (theta, xi) grid")
    p.add_argument("--points", type=int, default=181, help="nodes per axis, poles included then dropped")
    return parser


def _configure_logging(level: Optional[str]) -> None:
    name = (level or os.environ.get("EBM_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, name, logging.WARNING), format=LOG_FORMAT)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        run = _Run(args, argv)
        COMMANDS[args.command](run)
        run.finish()
        return run.exit_code
    except (ConfigError, InvalidParameterError, InvalidGeometryError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnresolvedReferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFERENCE
    except EBMError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
