"""Jump-maneuver planning for a rope-suspended wall-climbing robot.

The robot hangs from an anchor on a variable-length rope and jumps
between wall points by combining a short leg thrust at lift-off with a
pull-only hoist force along the rope.  This package models the reduced
pendulum dynamics, transcribes the point-to-point planning problem into
a nonlinear program, solves it with a built-in augmented-Lagrangian
method, validates plans by independent re-integration, and maps the
friction-limited region of reachable targets.
"""

__version__ = "0.1.0"

from .model import (
    Control,
    GuardError,
    ObstacleCone,
    PhysicalParams,
    State,
    Vec3,
    cartesian_position,
    cartesian_velocity,
    dynamics,
    friction_cone_margin,
    impulse_profile,
    kinetic_energy,
    obstacle_margin,
    potential_energy,
    spherical_from_cartesian,
    total_energy,
)
from .ocp import DecisionLayout, NlpProblem, OcpSolution, build_problem, solve_scenario
from .reach import TargetGrid, friction_wedge, sweep, winding_energy
from .scenario import (
    Scenario,
    Weights,
    default_scenario,
    experiment_fixture,
    load_scenario,
    save_scenario,
    scenario_hash,
)
from .sim import (
    ControlTape,
    Trajectory,
    ValidationReport,
    constant_tape,
    euler_lagrange_oracle,
    integrate_adaptive,
    integrate_fixed,
    solution_trajectory,
    trajectory_to_csv,
    validate,
)
from .solver import SolveResult, SolverOptions, kkt_residual, solve

__all__ = [
    "Control",
    "ControlTape",
    "DecisionLayout",
    "GuardError",
    "NlpProblem",
    "ObstacleCone",
    "OcpSolution",
    "PhysicalParams",
    "Scenario",
    "SolveResult",
    "SolverOptions",
    "State",
    "TargetGrid",
    "Trajectory",
    "ValidationReport",
    "Vec3",
    "Weights",
    "build_problem",
    "cartesian_position",
    "cartesian_velocity",
    "constant_tape",
    "default_scenario",
    "dynamics",
    "euler_lagrange_oracle",
    "experiment_fixture",
    "friction_cone_margin",
    "friction_wedge",
    "impulse_profile",
    "integrate_adaptive",
    "integrate_fixed",
    "kinetic_energy",
    "load_scenario",
    "obstacle_margin",
    "potential_energy",
    "save_scenario",
    "scenario_hash",
    "solution_trajectory",
    "solve",
    "solve_scenario",
    "spherical_from_cartesian",
    "sweep",
    "total_energy",
    "trajectory_to_csv",
    "validate",
    "winding_energy",
]
