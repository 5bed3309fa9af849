"""Command-line interface.

    ropejump solve    SCENARIO.json   plan one jump
    ropejump validate SOLUTION.json SCENARIO.json   re-integrate a plan
    ropejump reach    SCENARIO.json   sweep a target grid
    ropejump sweep-n  SCENARIO.json   discretization study table

Exit codes: 0 success, 1 usage or I/O error (machine-readable JSON on
stderr), 2 solver non-convergence (outputs are still written).  Set
ROPEJUMP_LOG=debug|info|warning to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .ocp import OcpSolution, solve_scenario
from .reach import TargetGrid, friction_wedge, reach_to_csv, sweep
from .scenario import (
    Scenario,
    Weights,
    load_scenario,
    scenario_hash,
    save_scenario,
)
from .sim import solution_trajectory, trajectory_to_csv, validate
from .svgplot import plot_reach, plot_solution

log = logging.getLogger("ropejump.cli")


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("ROPEJUMP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p.read_text()


def _load_scenario_arg(path: str, args) -> Scenario:
    scn = load_scenario(_read_text(path))
    if getattr(args, "n", None):
        scn = replace(scn, n_knots=args.n)
    if getattr(args, "mu", None) is not None:
        scn = replace(scn, params=replace(scn.params, mu=args.mu))
    if getattr(args, "weights", None):
        parts = args.weights.split(",")
        if len(parts) != 3:
            raise UsageError("--weights expects w_t,w_E,w_Fr")
        w_t, w_e, w_fr = (float(v) for v in parts)
        scn = replace(
            scn, weights=replace(scn.weights, time=w_t, terminal_kinetic=w_e, winding=w_fr)
        )
    if getattr(args, "soft_terminal", False):
        scn = replace(scn, soft_terminal=True)
    if getattr(args, "no_obstacle", False):
        scn = replace(scn, obstacle=None)
    return scn


def _write_manifest(out_dir: Path, args, scn: Scenario, outputs: list[str]):
    doc = {
        "tool": "ropejump",
        "version": __version__,
        "command": sys.argv[1:] if sys.argv[1:] else [],
        "scenario_hash": scenario_hash(scn),
        "created_utc": None if args.deterministic_svg else time.strftime(
            "%Y-%m-%dT%H:%M:%SZ", time.gmtime()
        ),
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )


def cmd_solve(args) -> int:
    scn = _load_scenario_arg(args.scenario, args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    solution = solve_scenario(scn)
    traj = solution_trajectory(solution, scn)

    outputs = ["solution.json", "trajectory.csv"]
    (out_dir / "solution.json").write_text(solution.to_json())
    (out_dir / "trajectory.csv").write_text(trajectory_to_csv(traj))
    if not args.no_svg:
        stamp = None if args.deterministic_svg else time.strftime(
            "created %Y-%m-%dT%H:%M:%SZ", time.gmtime()
        )
        (out_dir / "solve.svg").write_text(
            plot_solution(solution, scn, traj).render(stamp)
        )
        outputs.append("solve.svg")
    _write_manifest(out_dir, args, scn, outputs)

    report = validate(solution, scn)
    print(f"status              {solution.status}")
    print(f"t_f_s               {solution.t_f:.6g}")
    print(f"impulse_n           f_un={solution.f_un:.6g} f_ut={solution.f_ut:.6g}")
    print(f"terminal_error_m    {report.terminal_error_m:.6g}")
    print(f"normalized_jump_pct {report.normalized_error_jump_pct:.4g}")
    return 0 if solution.converged else 2


def cmd_validate(args) -> int:
    scn = _load_scenario_arg(args.scenario, args)
    solution = OcpSolution.from_json(_read_text(args.solution))
    if solution.scenario_digest != scenario_hash(scn):
        raise UsageError(
            "solution/scenario hash mismatch: "
            f"{solution.scenario_digest} vs {scenario_hash(scn)}"
        )
    report = validate(solution, scn)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "validation.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    print(f"terminal_error_m           {report.terminal_error_m:.6g}")
    print(f"normalized_error_rope_pct  {report.normalized_error_rope_pct:.4g}")
    print(f"normalized_error_jump_pct  {report.normalized_error_jump_pct:.4g}")
    print(f"max_defect_m               {report.max_defect_m:.6g}")
    for key, val in report.energy.items():
        print(f"energy.{key:<20} {val:.6g}")
    return 0


def _parse_grid(spec: str, z: float) -> TargetGrid:
    try:
        x_part, y_part = spec.split(",")
        x0, x1, xs = (float(v) for v in x_part.split(":"))
        y0, y1, _ = (float(v) for v in y_part.split(":"))
    except ValueError as exc:
        raise UsageError(f"bad --grid spec {spec!r}: use x0:x1:step,y0:y1:step") from exc
    if x1 < x0 or y1 < y0 or xs <= 0:
        raise UsageError("empty or inverted target grid")
    return TargetGrid(x_min=x0, x_max=x1, y_min=y0, y_max=y1, step=xs, z=z)


def cmd_reach(args) -> int:
    scn = _load_scenario_arg(args.scenario, args)
    if not args.keep_obstacle:
        scn = replace(scn, obstacle=None)
    grid = _parse_grid(args.grid, args.z)
    if not grid.points():
        raise UsageError("empty target grid")
    rmap = sweep(scn, grid, workers=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "reach.csv").write_text(reach_to_csv(rmap))
    wedge = friction_wedge(scn.p_0, scn.params.mu)
    stamp = None if args.deterministic_svg else time.strftime(
        "created %Y-%m-%dT%H:%M:%SZ", time.gmtime()
    )
    (out_dir / "reach.svg").write_text(plot_reach(rmap, wedge, scn).render(stamp))
    _write_manifest(out_dir, args, scn, ["reach.csv", "reach.svg"])
    n_ok = len(rmap.reached())
    print(f"cells {len(rmap.cells)}  reached {n_ok}  failed {len(rmap.cells) - n_ok}")
    return 0


def cmd_sweep_n(args) -> int:
    scn = _load_scenario_arg(args.scenario, args)
    try:
        n_list = [int(v) for v in args.n_list.split(",") if v]
    except ValueError as exc:
        raise UsageError(f"bad --n-list {args.n_list!r}") from exc
    if not n_list:
        raise UsageError("--n-list must name at least one discretization")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    header = f"{'N':>6} {'max_defect_m':>14} {'terminal_m':>12} {'rope_pct':>10} {'jump_pct':>10} {'wall_s':>8}"
    print(header)
    rows = []
    prev = None
    for n in n_list:
        scn_n = replace(scn, n_knots=n)
        t0 = time.perf_counter()
        try:
            sol = solve_scenario(scn_n, warm_start=prev)
            wall = time.perf_counter() - t0
            if not sol.converged:
                print(f"{n:>6} {'solver: ' + sol.status:>47} {wall:8.2f}")
                rows.append((n, None, sol.status, wall))
                continue
            prev = sol
            rep = validate(sol, scn_n)
            print(
                f"{n:>6} {rep.max_defect_m:14.6g} {rep.terminal_error_m:12.6g}"
                f" {rep.normalized_error_rope_pct:10.4g}"
                f" {rep.normalized_error_jump_pct:10.4g} {wall:8.2f}"
            )
            rows.append((n, rep, "converged", wall))
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            wall = time.perf_counter() - t0
            print(f"{n:>6} {'error: ' + str(exc):>47}")
            rows.append((n, None, f"error: {exc}", wall))

    lines = ["N,status,max_defect_m,terminal_error_m,normalized_rope_pct,normalized_jump_pct"]
    for n, rep, status, _ in rows:
        if rep is None:
            lines.append(f"{n},{status},,,,")
        else:
            lines.append(
                f"{n},{status},{rep.max_defect_m!r},{rep.terminal_error_m!r},"
                f"{rep.normalized_error_rope_pct!r},{rep.normalized_error_jump_pct!r}"
            )
    (out_dir / "sweep_n.csv").write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ropejump", description=__doc__)
    ap.add_argument("--version", action="version", version=f"ropejump {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--n", type=int, help="override the knot count")
        p.add_argument("--mu", type=float, help="override the friction coefficient")
        p.add_argument("--weights", help="override objective weights: w_t,w_E,w_Fr")
        p.add_argument("--soft-terminal", action="store_true",
                       help="soften the terminal constraint with a slack variable")
        p.add_argument("--no-obstacle", action="store_true", help="drop the obstacle")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--deterministic-svg", action="store_true",
                       help="suppress timestamps in SVG and manifest output")

    p = sub.add_parser("solve", help="plan one jump scenario")
    p.add_argument("scenario", help="scenario JSON path, or - for stdin")
    p.add_argument("--no-svg", action="store_true", help="skip the SVG figure")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="re-integrate and check a solution")
    p.add_argument("solution", help="solution JSON path")
    p.add_argument("scenario", help="scenario JSON path")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("reach", help="reachability sweep over a target grid")
    p.add_argument("scenario", help="base scenario JSON path")
    p.add_argument("--grid", default="0.5:6:0.5,0:8:0.5",
                   help="target grid x0:x1:step,y0:y1:step")
    p.add_argument("--z", type=float, default=-15.0, help="target depth")
    p.add_argument("--workers", type=int, default=1, help="parallel solver processes")
    p.add_argument("--keep-obstacle", action="store_true",
                   help="keep the scenario obstacle during the sweep")
    common(p)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("sweep-n", help="discretization study (error vs N)")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("--n-list", default="250,500,1000,2000",
                   help="comma-separated knot counts")
    common(p)
    p.set_defaults(func=cmd_sweep_n)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}) + "\n"
        )
        return 1


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
