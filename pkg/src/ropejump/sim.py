"""Numerical integration and plan validation.

Two integration routes are kept deliberately independent: an adaptive
embedded Runge-Kutta 5(4) scheme (the validation-grade integrator) and
a classical fixed-step RK4 scheme that serves as its cross-check.  A
finite-difference Euler-Lagrange oracle re-derives the accelerations
straight from the scalar Lagrangian so the hand-derived equations of
motion in the model module can be verified against an independent
derivation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import model
from .model import (
    Control,
    GuardError,
    L_MIN,
    PhysicalParams,
    SIN_THETA_MIN,
    State,
    Vec3,
)
from .ocp import OcpSolution, build_problem
from .scenario import Scenario

# Integration stops slightly before the dynamics guards so the right-hand
# side stays exact up to the abort point.
_EVENT_SIN = 1.2 * SIN_THETA_MIN
_EVENT_L = 1.2 * L_MIN

CSV_COLUMNS = (
    "t", "theta", "phi", "l", "theta_dot", "phi_dot", "l_dot",
    "X", "Y", "Z", "f_r", "thrust_profile",
)


@dataclass(frozen=True)
class ControlTape:
    """Control signal over a horizon: piecewise-linear hoist force knots
    plus constant thrust amplitudes under the continuous Gaussian profile."""

    knot_times: np.ndarray
    f_r_knots: np.ndarray
    f_un: float
    f_ut: float
    params: PhysicalParams

    def f_r(self, t):
        return np.interp(t, self.knot_times, self.f_r_knots)

    def control(self, t: float) -> Control:
        return Control(float(self.f_r(t)), self.f_un, self.f_ut)


def constant_tape(
    params: PhysicalParams, t_f: float, f_r: float = 0.0,
    f_un: float = 0.0, f_ut: float = 0.0,
) -> ControlTape:
    horizon = max(t_f, 1e-9)
    return ControlTape(
        knot_times=np.array([0.0, horizon]),
        f_r_knots=np.array([f_r, f_r]),
        f_un=f_un,
        f_ut=f_ut,
        params=params,
    )


@dataclass
class Trajectory:
    """Time-indexed states, controls and Cartesian positions.

    Controls store the thrust amplitudes; the delivered thrust at each
    sample is amplitude * profile.  Immutable by convention once built.
    """

    times: np.ndarray
    states: np.ndarray  # (n, 6)
    controls: np.ndarray  # (n, 3): f_r, f_un, f_ut
    profile: np.ndarray  # (n,)
    cartesian: np.ndarray  # (n, 3)
    diagnostic: str | None = None

    def __post_init__(self):
        n = len(self.times)
        if not (
            self.states.shape == (n, 6)
            and self.controls.shape == (n, 3)
            and self.profile.shape == (n,)
            and self.cartesian.shape == (n, 3)
        ):
            raise ValueError("trajectory arrays must share one sample count")
        if self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> State:
        return State.from_array(self.states[i])

    def control(self, i: int) -> Control:
        return Control(*(float(v) for v in self.controls[i]))

    def point(self, i: int) -> Vec3:
        return Vec3.from_array(self.cartesian[i])


def _cartesian_of(states: np.ndarray) -> np.ndarray:
    th, ph, el = states[:, 0], states[:, 1], states[:, 2]
    st, ct = np.sin(th), np.cos(th)
    return np.column_stack([el * st * np.cos(ph), el * st * np.sin(ph), -el * ct])


def make_trajectory(
    times: np.ndarray, states: np.ndarray, tape: ControlTape,
    diagnostic: str | None = None,
) -> Trajectory:
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    p = tape.params
    prof = np.exp(-0.5 * ((times - p.t_center) / p.sigma) ** 2)
    controls = np.column_stack(
        [tape.f_r(times), np.full_like(times, tape.f_un), np.full_like(times, tape.f_ut)]
    )
    return Trajectory(
        times=times,
        states=states,
        controls=controls,
        profile=prof,
        cartesian=_cartesian_of(states),
        diagnostic=diagnostic,
    )


def _rhs(t: float, x: np.ndarray, tape: ControlTape, p: PhysicalParams) -> np.ndarray:
    th, _, el, thd, phd, eld = x
    st, ct = math.sin(th), math.cos(th)
    # Defensive softening only below the abort events.
    st_e = max(st, 0.5 * SIN_THETA_MIN)
    l_e = max(el, 0.5 * L_MIN)
    g = p.gravity
    u = (t - p.t_center) / p.sigma
    gp = math.exp(-0.5 * u * u)
    f_r = float(tape.f_r(t))
    return np.array(
        [
            thd,
            phd,
            eld,
            -2.0 * thd * eld / l_e + ct * st * phd * phd - (g / l_e) * st
            + tape.f_un * gp / (p.mass * l_e),
            -2.0 * (ct / st_e) * thd * phd - 2.0 * phd * eld / l_e
            + tape.f_ut * gp / (p.mass * l_e * st_e),
            l_e * thd * thd + l_e * st * st * phd * phd + g * ct + f_r / p.mass,
        ]
    )


def integrate_adaptive(
    x0: State,
    tape: ControlTape,
    t_f: float,
    rtol: float = 1e-9,
    atol: float = 1e-11,
    t_eval=None,
) -> Trajectory:
    """Adaptive embedded RK 5(4) integration with dense-output sampling.

    Aborts (returning the partial trajectory with a diagnostic) when the
    state approaches a coordinate-singularity guard.  t_eval may be a
    sample count or an array of requested times.
    """
    model._check_guards(x0)
    if rtol <= 0.0 or atol <= 0.0:
        raise ValueError("tolerances must be positive")
    p = tape.params
    if t_f == 0.0:
        return make_trajectory(np.array([0.0]), x0.as_array()[None, :], tape)

    def ev_theta(t, x, *_):
        return math.sin(x[0]) - _EVENT_SIN

    def ev_l(t, x, *_):
        return x[2] - _EVENT_L

    ev_theta.terminal = True
    ev_l.terminal = True
    sol = solve_ivp(
        _rhs,
        (0.0, t_f),
        x0.as_array(),
        args=(tape, p),
        method="RK45",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=[ev_theta, ev_l],
        first_step=t_f / 1000.0,
    )
    if sol.status == -1:
        raise RuntimeError(f"integration step failure: {sol.message}")
    t_end = float(sol.t[-1])
    diagnostic = None
    if sol.status == 1:
        which = "sin(theta)" if len(sol.t_events[0]) else "rope length"
        diagnostic = f"aborted at t={t_end:.6g}: {which} guard reached"

    if t_eval is None:
        t_eval = 600
    if np.isscalar(t_eval):
        times = np.linspace(0.0, t_end, int(t_eval))
    else:
        times = np.asarray(t_eval, dtype=float)
        times = times[times <= t_end + 1e-15]
        if times.size == 0 or times[0] != 0.0:
            times = np.concatenate([[0.0], times])
        if times[-1] < t_end:
            times = np.concatenate([times, [t_end]])
    states = sol.sol(times).T
    return make_trajectory(times, states, tape, diagnostic=diagnostic)


def integrate_fixed(
    x0: State, tape: ControlTape, t_f: float, n_steps: int
) -> Trajectory:
    """Classical fixed-step RK4; deterministic and bit-reproducible."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    model._check_guards(x0)
    p = tape.params
    h = t_f / n_steps
    ys = np.empty((n_steps + 1, 6))
    ys[0] = x0.as_array()
    diagnostic = None
    n_done = n_steps
    for k in range(n_steps):
        t = k * h
        y = ys[k]
        if math.sin(y[0]) < SIN_THETA_MIN or y[2] < L_MIN:
            diagnostic = f"aborted at step {k}: singularity guard reached"
            n_done = k
            break
        k1 = _rhs(t, y, tape, p)
        k2 = _rhs(t + 0.5 * h, y + 0.5 * h * k1, tape, p)
        k3 = _rhs(t + 0.5 * h, y + 0.5 * h * k2, tape, p)
        k4 = _rhs(t + h, y + h * k3, tape, p)
        ys[k + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    times = np.arange(n_done + 1) * h
    return make_trajectory(times, ys[: n_done + 1], tape, diagnostic=diagnostic)


# ------------------------------------------------------------------ oracle

_FD_FIRST = 1e-5
_FD_SECOND = 5e-4


def _lagrangian(q: np.ndarray, qd: np.ndarray, p: PhysicalParams) -> float:
    th, _, el = q
    thd, phd, eld = qd
    st = math.sin(th)
    kin = 0.5 * p.mass * (el * el * (thd * thd + st * st * phd * phd) + eld * eld)
    pot = -p.mass * p.gravity * el * math.cos(th)
    return kin - pot


def euler_lagrange_oracle(
    s: State, generalized_forces: tuple[float, float, float], p: PhysicalParams
) -> np.ndarray:
    """Accelerations (theta_ddot, phi_ddot, l_ddot) from the Lagrangian alone.

    Builds the mass matrix and bias terms by central finite differences
    of the scalar Lagrangian and solves M qdd = Q + dL/dq - C qd.  Fully
    independent of the closed-form equations of motion.  Second
    derivatives use a larger step than first derivatives: at 1e-5 the
    roundoff of the second differences would swamp the 1e-6 agreement
    target.
    """
    if math.sin(s.theta) < SIN_THETA_MIN:
        raise GuardError("sin(theta) below guard in oracle")
    if s.l < L_MIN:
        raise GuardError("rope length below guard in oracle")
    q = np.array([s.theta, s.phi, s.l])
    qd = np.array([s.theta_dot, s.phi_dot, s.l_dot])
    Q = np.asarray(generalized_forces, dtype=float)
    h1 = _FD_FIRST * np.maximum(1.0, np.abs(q))
    h2q = _FD_SECOND * np.maximum(1.0, np.abs(q))
    h2d = _FD_SECOND * np.maximum(1.0, np.abs(qd))

    def L(qq, qqd):
        return _lagrangian(qq, qqd, p)

    M = np.empty((3, 3))
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = h2d[i]
        M[i, i] = (L(q, qd + ei) - 2.0 * L(q, qd) + L(q, qd - ei)) / h2d[i] ** 2
        for j in range(i + 1, 3):
            ej = np.zeros(3)
            ej[j] = h2d[j]
            M[i, j] = M[j, i] = (
                L(q, qd + ei + ej) - L(q, qd + ei - ej)
                - L(q, qd - ei + ej) + L(q, qd - ei - ej)
            ) / (4.0 * h2d[i] * h2d[j])

    C = np.empty((3, 3))  # C[i, j] = d^2 L / dq_j dqd_i
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = h2d[i]
        for j in range(3):
            ej = np.zeros(3)
            ej[j] = h2q[j]
            C[i, j] = (
                L(q + ej, qd + ei) - L(q + ej, qd - ei)
                - L(q - ej, qd + ei) + L(q - ej, qd - ei)
            ) / (4.0 * h2q[j] * h2d[i])

    dLdq = np.empty(3)
    for j in range(3):
        ej = np.zeros(3)
        ej[j] = h1[j]
        dLdq[j] = (L(q + ej, qd) - L(q - ej, qd)) / (2.0 * h1[j])

    if np.linalg.cond(M) > 1e12:
        raise ArithmeticError("ill-conditioned mass matrix in Lagrangian oracle")
    return np.linalg.solve(M, Q + dLdq - C @ qd)


# ------------------------------------------------------------------ validation


@dataclass
class ValidationReport:
    """Independent re-integration check of an optimized plan."""

    terminal_error_m: float
    normalized_error_rope_pct: float
    normalized_error_jump_pct: float
    max_defect_m: float
    energy: dict = field(default_factory=dict)
    diagnostic: str | None = None

    def to_dict(self) -> dict:
        return {
            "terminal_error_m": self.terminal_error_m,
            "normalized_error_rope_pct": self.normalized_error_rope_pct,
            "normalized_error_jump_pct": self.normalized_error_jump_pct,
            "max_defect_m": self.max_defect_m,
            "energy": self.energy,
            "diagnostic": self.diagnostic,
        }


def solution_tape(solution: OcpSolution, params: PhysicalParams) -> ControlTape:
    return ControlTape(
        knot_times=solution.knot_times(),
        f_r_knots=solution.f_r_knots,
        f_un=solution.f_un,
        f_ut=solution.f_ut,
        params=params,
    )


def solution_trajectory(solution: OcpSolution, scenario: Scenario) -> Trajectory:
    """Knot-resolution trajectory as stored in the decision vector."""
    tape = solution_tape(solution, scenario.params)
    return make_trajectory(solution.knot_times(), solution.states, tape)


def _max_defect_m(solution: OcpSolution, scenario: Scenario) -> float:
    prob = build_problem(
        replace(scenario, n_knots=solution.n_knots, soft_terminal=solution.soft_terminal)
    )
    z = solution.decision_vector()
    scaled = prob.defect_residuals(z).reshape(solution.n_knots, 6)
    h = solution.t_f / solution.n_knots
    raw = scaled * (h * prob.x_char[None, :])  # back to state units
    # Map the coordinate part of each defect to a Cartesian displacement.
    worst = 0.0
    for k in range(solution.n_knots):
        th, ph, el = solution.states[k, :3]
        st, ct = math.sin(th), math.cos(th)
        sp, cp = math.sin(ph), math.cos(ph)
        J = np.array(
            [
                [el * ct * cp, -el * st * sp, st * cp],
                [el * ct * sp, el * st * cp, st * sp],
                [el * st, 0.0, -ct],
            ]
        )
        worst = max(worst, float(np.linalg.norm(J @ raw[k, :3])))
    return worst


def validate(solution: OcpSolution, scenario: Scenario) -> ValidationReport:
    """Re-integrate the plan at high accuracy and compare against the target.

    The hoist force is interpolated linearly between the optimization
    knots and the thrust follows the continuous Gaussian profile, i.e.
    exactly the control signal the transcription represents.
    """
    p = scenario.params
    tape = solution_tape(solution, p)
    th0, ph0, l0 = model.spherical_from_cartesian(scenario.p_0)
    x0 = State(th0, ph0, l0, 0.0, 0.0, 0.0)

    knots = solution.knot_times()
    burst = np.linspace(0.0, min(8.0 * p.sigma, solution.t_f), 400)
    dense = np.linspace(0.0, solution.t_f, 800)
    times = np.unique(np.concatenate([knots, burst, dense]))
    traj = integrate_adaptive(x0, tape, solution.t_f, rtol=1e-10, atol=1e-12, t_eval=times)

    p_end = traj.cartesian[-1]
    p_f = scenario.p_f.as_array()
    err = float(np.linalg.norm(p_end - p_f))
    rope_span = abs(scenario.p_f.norm() - scenario.p_0.norm())
    jump_span = float(np.linalg.norm(p_f - scenario.p_0.as_array()))
    rope_pct = 100.0 * err / max(rope_span, 1e-12)
    jump_pct = 100.0 * err / max(jump_span, 1e-12)

    # Energy bookkeeping along the re-integrated path.
    t = traj.times
    th, el = traj.states[:, 0], traj.states[:, 2]
    thd, phd, eld = traj.states[:, 3], traj.states[:, 4], traj.states[:, 5]
    st = np.sin(th)
    kin = 0.5 * p.mass * (el**2 * (thd**2 + st**2 * phd**2) + eld**2)
    pot = -p.mass * p.gravity * el * np.cos(th)
    total = kin + pot
    f_r = traj.controls[:, 0]
    w_winch = float(np.trapz(f_r * eld, t))
    q_power = traj.profile * (
        el * solution.f_un * thd + el * st * solution.f_ut * phd
    )
    w_impulse = float(np.trapz(q_power, t))
    d_e = float(total[-1] - total[0])
    energy = {
        "initial_J": float(total[0]),
        "final_J": float(total[-1]),
        "delta_J": d_e,
        "winch_work_J": w_winch,
        "impulse_work_J": w_impulse,
        "residual_J": d_e - w_winch - w_impulse,
    }
    return ValidationReport(
        terminal_error_m=err,
        normalized_error_rope_pct=rope_pct,
        normalized_error_jump_pct=jump_pct,
        max_defect_m=_max_defect_m(solution, scenario),
        energy=energy,
        diagnostic=traj.diagnostic,
    )


# ------------------------------------------------------------------ export


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV with round-trip float formatting (lossless re-ingestion)."""
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for i in range(len(traj)):
        row = (
            traj.times[i],
            *traj.states[i],
            *traj.cartesian[i],
            traj.controls[i, 0],
            traj.profile[i],
        )
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()
