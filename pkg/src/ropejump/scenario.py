"""Declarative jump scenarios: endpoints, obstacle, parameters, options.

A scenario ties together the lift-off and target points (anchor frame,
wall at x = 0), the physical parameters, the optional pillar obstacle,
the objective weights and the transcription / solver settings.  The
on-disk format is a JSON document with explicit units in field names;
unknown keys are rejected so typos cannot silently disable a setting.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace

from .model import ObstacleCone, PhysicalParams, Vec3, L_MIN
from .solver import SolverOptions

log = logging.getLogger("ropejump.scenario")

T_F_MIN = 0.2
T_F_MAX = 20.0


@dataclass(frozen=True)
class Weights:
    """Objective weights: time, terminal kinetic energy, hoist work, slack."""

    time: float = 1.0
    terminal_kinetic: float = 0.05
    winding: float = 1e-6
    slack: float = 100.0


@dataclass(frozen=True)
class Scenario:
    p_0: Vec3
    p_f: Vec3
    params: PhysicalParams = field(default_factory=PhysicalParams)
    obstacle: ObstacleCone | None = None
    weights: Weights = field(default_factory=Weights)
    n_knots: int = 500
    soft_terminal: bool = False
    slack_cap: float = 1.0  # m^2, soft mode only
    solver_options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        for name, p in (("p_0", self.p_0), ("p_f", self.p_f)):
            if p.x < 0.0:
                raise ValueError(f"{name}.x = {p.x} would sit behind the wall (x >= 0)")
            if p.z > 0.0:
                raise ValueError(
                    f"{name}.z = {p.z} does not stay below the anchor level (z <= 0)"
                )
        if self.p_0.norm() <= L_MIN:
            raise ValueError("p_0 is too close to the anchor")
        if self.p_f.norm() <= L_MIN:
            raise ValueError("p_f is too close to the anchor")
        if self.n_knots < 10:
            raise ValueError("n_knots must be at least 10")
        if self.soft_terminal and self.slack_cap <= 0.0:
            raise ValueError("slack_cap must be positive in soft terminal mode")
        if self.params.mu > 3.0:
            log.warning("friction coefficient mu = %.3g looks implausibly high", self.params.mu)


def default_pillar() -> ObstacleCone:
    """Default rock pillar: vertical cone fitted to the target locations."""
    return ObstacleCone(
        base_center=Vec3(0.0, 2.5, -20.5),
        axis=Vec3(0.0, 0.0, 1.0),
        height=20.0,
        base_radius=2.5,
    )


def default_scenario() -> Scenario:
    """Baseline jump: 12 m point-to-point maneuver around the pillar."""
    return Scenario(
        p_0=Vec3(0.24, 0.0, -8.0),
        p_f=Vec3(3.0, 3.0, -20.0),
        params=PhysicalParams(),
        obstacle=default_pillar(),
        n_knots=500,
    )


_FIXTURE_TARGETS = {
    1: Vec3(2.60, 2.73, -20.46),
    2: Vec3(2.50, 0.05, -20.46),
    3: Vec3(0.55, -0.8, -17.76),
    4: Vec3(1.73, 3.8, -20.46),
}


def experiment_fixture(fixture_id: int) -> Scenario:
    """The four benchmark jumps (targets on or near the pillar).

    Fixtures 1-3 start from the wall point (0.24, 0, -8); fixture 4
    lifts off from a point already on the pillar surface, so its
    scenario carries no obstacle (the default cone pose would contain
    both its endpoints).
    """
    if fixture_id not in _FIXTURE_TARGETS:
        raise ValueError(f"unknown experiment fixture id {fixture_id!r}; expected 1..4")
    base = default_scenario()
    if fixture_id == 4:
        return replace(
            base, p_0=Vec3(0.63, 2.35, -7.5), p_f=_FIXTURE_TARGETS[4], obstacle=None
        )
    return replace(base, p_f=_FIXTURE_TARGETS[fixture_id])


def _vec_to_list(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _vec_from_list(name: str, raw) -> Vec3:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ValueError(f"{name} must be a list of three numbers")
    return Vec3(float(raw[0]), float(raw[1]), float(raw[2]))


def scenario_to_dict(s: Scenario) -> dict:
    doc = {
        "start_m": _vec_to_list(s.p_0),
        "target_m": _vec_to_list(s.p_f),
        "params": {
            "mass_kg": s.params.mass,
            "gravity_m_s2": s.params.gravity,
            "mu": s.params.mu,
            "f_u_max_n": s.params.f_u_max,
            "f_r_max_n": s.params.f_r_max,
            "t_thrust_s": s.params.t_thrust,
        },
        "weights": {
            "time": s.weights.time,
            "terminal_kinetic": s.weights.terminal_kinetic,
            "winding": s.weights.winding,
            "slack": s.weights.slack,
        },
        "n_knots": s.n_knots,
        "terminal": (
            {"mode": "soft", "slack_cap_m2": s.slack_cap}
            if s.soft_terminal
            else {"mode": "hard"}
        ),
        "solver": {
            "max_outer": s.solver_options.max_outer,
            "max_inner": s.solver_options.max_inner,
            "kkt_tol": s.solver_options.kkt_tol,
            "feas_tol": s.solver_options.feas_tol,
            "penalty0": s.solver_options.penalty0,
        },
    }
    if s.obstacle is not None:
        doc["obstacle"] = {
            "base_center_m": _vec_to_list(s.obstacle.base_center),
            "axis": _vec_to_list(s.obstacle.axis),
            "height_m": s.obstacle.height,
            "base_radius_m": s.obstacle.base_radius,
        }
    return doc


def _reject_unknown(name: str, raw: dict, allowed: set[str]):
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in {name}: {sorted(unknown)}")


def scenario_from_dict(doc: dict) -> Scenario:
    _reject_unknown(
        "scenario",
        doc,
        {"start_m", "target_m", "params", "obstacle", "weights", "n_knots",
         "terminal", "solver"},
    )
    if "start_m" not in doc or "target_m" not in doc:
        raise ValueError("scenario requires start_m and target_m")
    base = default_scenario()

    params = base.params
    if "params" in doc:
        raw = doc["params"]
        _reject_unknown(
            "params",
            raw,
            {"mass_kg", "gravity_m_s2", "mu", "f_u_max_n", "f_r_max_n", "t_thrust_s"},
        )
        params = PhysicalParams(
            mass=float(raw.get("mass_kg", params.mass)),
            gravity=float(raw.get("gravity_m_s2", params.gravity)),
            mu=float(raw.get("mu", params.mu)),
            f_u_max=float(raw.get("f_u_max_n", params.f_u_max)),
            f_r_max=float(raw.get("f_r_max_n", params.f_r_max)),
            t_thrust=float(raw.get("t_thrust_s", params.t_thrust)),
        )

    obstacle = base.obstacle
    if "obstacle" in doc:
        raw = doc["obstacle"]
        if raw is None:
            obstacle = None
        else:
            _reject_unknown(
                "obstacle", raw, {"base_center_m", "axis", "height_m", "base_radius_m"}
            )
            obstacle = ObstacleCone(
                base_center=_vec_from_list("obstacle.base_center_m", raw["base_center_m"]),
                axis=_vec_from_list("obstacle.axis", raw.get("axis", [0.0, 0.0, 1.0])),
                height=float(raw["height_m"]),
                base_radius=float(raw["base_radius_m"]),
            )

    weights = base.weights
    if "weights" in doc:
        raw = doc["weights"]
        _reject_unknown("weights", raw, {"time", "terminal_kinetic", "winding", "slack"})
        weights = Weights(
            time=float(raw.get("time", weights.time)),
            terminal_kinetic=float(raw.get("terminal_kinetic", weights.terminal_kinetic)),
            winding=float(raw.get("winding", weights.winding)),
            slack=float(raw.get("slack", weights.slack)),
        )

    soft = False
    slack_cap = base.slack_cap
    if "terminal" in doc:
        raw = doc["terminal"]
        _reject_unknown("terminal", raw, {"mode", "slack_cap_m2"})
        mode = raw.get("mode", "hard")
        if mode not in ("hard", "soft"):
            raise ValueError(f"terminal.mode must be 'hard' or 'soft', got {mode!r}")
        soft = mode == "soft"
        slack_cap = float(raw.get("slack_cap_m2", slack_cap))

    solver_options = base.solver_options
    if "solver" in doc:
        raw = doc["solver"]
        _reject_unknown(
            "solver",
            raw,
            {"max_outer", "max_inner", "kkt_tol", "feas_tol", "penalty0"},
        )
        solver_options = SolverOptions(
            max_outer=int(raw.get("max_outer", solver_options.max_outer)),
            max_inner=int(raw.get("max_inner", solver_options.max_inner)),
            kkt_tol=float(raw.get("kkt_tol", solver_options.kkt_tol)),
            feas_tol=float(raw.get("feas_tol", solver_options.feas_tol)),
            penalty0=float(raw.get("penalty0", solver_options.penalty0)),
        )

    return Scenario(
        p_0=_vec_from_list("start_m", doc["start_m"]),
        p_f=_vec_from_list("target_m", doc["target_m"]),
        params=params,
        obstacle=obstacle,
        weights=weights,
        n_knots=int(doc.get("n_knots", base.n_knots)),
        soft_terminal=soft,
        slack_cap=slack_cap,
        solver_options=solver_options,
    )


def load_scenario(text: str) -> Scenario:
    """Parse a scenario JSON document (parse errors carry positions)."""
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def save_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n"


def scenario_hash(s: Scenario) -> str:
    """Stable digest used to tie solutions to the scenario they solve."""
    canon = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
