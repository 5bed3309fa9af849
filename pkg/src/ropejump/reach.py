"""Reachability analysis: batch target sweeps and the friction wedge.

For a grid of candidate targets below the lift-off point, each cell is
planned independently (no obstacle unless the base scenario keeps one)
and recorded as reached or failed together with the hoist energy spent.
Cells are solved cold, so the map is identical for any worker count and
any completion order.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import Vec3
from .ocp import solve_scenario
from .scenario import Scenario
from .sim import Trajectory, solution_trajectory, validate

CSV_COLUMNS = ("X", "Y", "Z", "status", "winding_energy_J", "t_f_s", "terminal_error_m")


@dataclass(frozen=True)
class TargetGrid:
    """Rectangular X-Y target grid at a fixed depth Z."""

    x_min: float = 0.5
    x_max: float = 6.0
    y_min: float = 0.0
    y_max: float = 8.0
    step: float = 0.5
    z: float = -15.0

    def points(self) -> list[Vec3]:
        xs = np.arange(self.x_min, self.x_max + 1e-9, self.step)
        ys = np.arange(self.y_min, self.y_max + 1e-9, self.step)
        return [Vec3(float(x), float(y), self.z) for x in xs for y in ys]


@dataclass(frozen=True)
class CellResult:
    target: Vec3
    status: str  # reached | failed | skipped
    winding_energy: float
    t_f: float
    terminal_error: float


@dataclass
class ReachabilityMap:
    grid: TargetGrid
    cells: list[CellResult]

    def reached(self) -> list[CellResult]:
        return [c for c in self.cells if c.status == "reached"]


@dataclass(frozen=True)
class FrictionWedge:
    """Top-view cone of lateral directions achievable at lift-off.

    The tangential thrust is limited to mu times the normal thrust, so
    in the X-Y plane the admissible jump directions span a wedge of
    half-angle atan(mu) about the wall normal (+X) through the lift-off
    point.
    """

    apex_x: float
    apex_y: float
    half_angle: float

    def rays(self) -> tuple[tuple[float, float], tuple[float, float]]:
        a = self.half_angle
        return (
            (math.cos(a), math.sin(a)),
            (math.cos(-a), math.sin(-a)),
        )

    def contains_xy(self, x: float, y: float) -> bool:
        dx, dy = x - self.apex_x, y - self.apex_y
        if dx <= 0.0:
            return False
        return math.atan2(abs(dy), dx) <= self.half_angle


def friction_wedge(p_0: Vec3, mu: float) -> FrictionWedge:
    if mu < 0.0:
        raise ValueError("mu must be non-negative")
    return FrictionWedge(apex_x=p_0.x, apex_y=p_0.y, half_angle=math.atan(mu))


def winding_energy(traj: Trajectory) -> float:
    """Hoist energy |F_r l_dot| integrated over the trajectory samples, J."""
    power = np.abs(traj.controls[:, 0] * traj.states[:, 5])
    return float(np.trapz(power, traj.times))


def _solve_cell(args) -> CellResult:
    base, target = args
    try:
        scn = replace(base, p_f=target)
    except ValueError:
        return CellResult(target, "skipped", 0.0, 0.0, float("nan"))
    try:
        sol = solve_scenario(scn)
    except (ValueError, ArithmeticError, RuntimeError):
        return CellResult(target, "failed", 0.0, 0.0, float("nan"))
    if not sol.converged:
        return CellResult(target, "failed", 0.0, sol.t_f, float("nan"))
    report = validate(sol, scn)
    energy = winding_energy(solution_trajectory(sol, scn))
    return CellResult(target, "reached", energy, sol.t_f, report.terminal_error_m)


def sweep(base: Scenario, grid: TargetGrid, workers: int = 1) -> ReachabilityMap:
    """Solve the planning problem for every grid target.

    Individual failures are recorded, never raised.  With workers > 1
    the cells are distributed over a process pool; results are
    aggregated in grid order so the map does not depend on scheduling.
    """
    targets = grid.points()
    if not targets:
        raise ValueError("target grid is empty")
    jobs = [(base, t) for t in targets]
    if workers <= 1:
        cells = [_solve_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_solve_cell, jobs))
    return ReachabilityMap(grid=grid, cells=cells)


def reach_to_csv(rmap: ReachabilityMap) -> str:
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for c in rmap.cells:
        fields = (
            repr(float(c.target.x)),
            repr(float(c.target.y)),
            repr(float(c.target.z)),
            c.status,
            repr(float(c.winding_energy)),
            repr(float(c.t_f)),
            repr(float(c.terminal_error)),
        )
        out.write(",".join(fields) + "\n")
    return out.getvalue()
