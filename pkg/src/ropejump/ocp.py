"""Direct transcription of the jump planning problem.

The continuous problem (minimum time + terminal kinetic energy + hoist
work, subject to the pendulum dynamics, wall / ceiling / obstacle
constraints and actuation limits) is transcribed with trapezoidal
collocation on N uniform intervals of the scaled time tau = t / t_f,
with the final time a decision variable.

Decision vector layout (hard terminal mode, n = 7 N + 10):

    [ t_f | f_un f_ut | x_0 ... x_N (6 each) | f_r0 ... f_rN | (slack) ]

The thrust amplitudes are two scalars shared by every knot; the force
they deliver at knot k is amplitude * exp(-(t_k - t_c)^2 / (2 sigma^2)).

Equality residuals are ordered [initial state (6), defects (6 N),
terminal position (3, hard mode)].  Defects are reported per unit time
and per characteristic state magnitude, so a residual of 1e-6 means the
trajectory drifts by about one part in 1e6 of the natural state scale
per second.  Inequalities are feasible when >= 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import model
from .model import L_MIN, SIN_THETA_MIN, Vec3, spherical_from_cartesian
from .scenario import Scenario, T_F_MAX, T_F_MIN, scenario_hash
from .solver import SolveResult, SolverOptions, solve as nlp_solve

# The theta box bound sits slightly inside the sin(theta) guard so that
# feasible iterates never enter the clamped dynamics branch.
THETA_BOUND = 1.2e-3
RATE_BOUND_ANG = 10.0
RATE_BOUND_LEN = 30.0


@dataclass(frozen=True)
class DecisionLayout:
    """Offsets into the decision vector for N intervals (N+1 knots)."""

    n_knots: int
    soft_terminal: bool = False

    def __post_init__(self):
        if self.n_knots < 10:
            raise ValueError("n_knots must be at least 10")

    I_TF = 0
    I_FUN = 1
    I_FUT = 2
    STATE_BASE = 3

    @property
    def n_states(self) -> int:
        return self.n_knots + 1

    @property
    def fr_base(self) -> int:
        return self.STATE_BASE + 6 * self.n_states

    @property
    def i_slack(self) -> int:
        if not self.soft_terminal:
            raise ValueError("no slack variable in hard terminal mode")
        return self.fr_base + self.n_states

    @property
    def n_vars(self) -> int:
        return self.fr_base + self.n_states + (1 if self.soft_terminal else 0)

    def state_index(self, k: int) -> int:
        return self.STATE_BASE + 6 * k

    def pack(self, t_f, f_un, f_ut, states, f_r_knots, slack=0.0) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        f_r_knots = np.asarray(f_r_knots, dtype=float)
        if states.shape != (self.n_states, 6):
            raise ValueError(f"states must have shape {(self.n_states, 6)}")
        if f_r_knots.shape != (self.n_states,):
            raise ValueError(f"f_r_knots must have shape {(self.n_states,)}")
        z = np.empty(self.n_vars)
        z[self.I_TF] = t_f
        z[self.I_FUN] = f_un
        z[self.I_FUT] = f_ut
        z[self.STATE_BASE : self.fr_base] = states.ravel()
        z[self.fr_base : self.fr_base + self.n_states] = f_r_knots
        if self.soft_terminal:
            z[self.i_slack] = slack
        return z

    def unpack(self, z: np.ndarray):
        states = z[self.STATE_BASE : self.fr_base].reshape(self.n_states, 6)
        f_r = z[self.fr_base : self.fr_base + self.n_states]
        slack = float(z[self.i_slack]) if self.soft_terminal else 0.0
        return float(z[self.I_TF]), float(z[self.I_FUN]), float(z[self.I_FUT]), states, f_r, slack


@dataclass
class DecodedVars:
    t_f: float
    f_un: float
    f_ut: float
    states: np.ndarray
    f_r_knots: np.ndarray
    slack: float


class JacobianCOO:
    """Sparse Jacobian in fixed-pattern coordinate form."""

    __slots__ = ("rows", "cols", "data", "shape")

    def __init__(self, rows, cols, data, shape):
        self.rows = rows
        self.cols = cols
        self.data = data
        self.shape = shape

    def t_dot(self, w: np.ndarray) -> np.ndarray:
        return np.bincount(
            self.cols, weights=self.data * w[self.rows], minlength=self.shape[1]
        )

    def dot(self, v: np.ndarray) -> np.ndarray:
        return np.bincount(
            self.rows, weights=self.data * v[self.cols], minlength=self.shape[0]
        )

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.data)
        return out


class _Eval:
    """Shared per-point evaluation workspace."""

    __slots__ = (
        "t_f", "f_un", "f_ut", "X", "fr", "slack", "tau", "t", "h",
        "s", "c", "s_e", "l_e", "gp", "gpd", "f", "A", "ft", "pos", "posjac",
        "margin", "margin_grad",
    )


def _stage_plan(n_final: int) -> list[int]:
    stages = []
    k = 40
    while k < n_final / 2.5:
        stages.append(k)
        k *= 4
    return stages


class NlpProblem:
    """Transcribed nonlinear program for one scenario.

    Evaluation methods accept the packed decision vector; residual and
    Jacobian evaluations at the same point share one cached workspace.
    """

    def __init__(self, scenario: Scenario, dynamics_override=None):
        _reject_bad_endpoints(scenario)
        self.scenario = scenario
        self.layout = DecisionLayout(scenario.n_knots, scenario.soft_terminal)
        self._override = dynamics_override

        p = scenario.params
        th0, ph0, l0 = spherical_from_cartesian(scenario.p_0)
        thf, phf, lf = spherical_from_cartesian(scenario.p_f)
        self.x0_target = np.array([th0, ph0, l0, 0.0, 0.0, 0.0])
        self.xf_position = np.array([thf, phf, lf])
        self.p_f = scenario.p_f.as_array()
        self.l_char = l0
        self.x_char = np.array(
            [1.0, 1.0, l0, math.sqrt(p.gravity / l0), math.sqrt(p.gravity / l0),
             math.sqrt(p.gravity * l0)]
        )
        self.t_f_guess = float(np.clip(math.pi * math.sqrt(l0 / p.gravity), T_F_MIN, T_F_MAX))

        lay = self.layout
        n_states = lay.n_states
        l_max = 2.0 * max(l0, lf) + 5.0

        lower = np.empty(lay.n_vars)
        upper = np.empty(lay.n_vars)
        lower[lay.I_TF], upper[lay.I_TF] = T_F_MIN, T_F_MAX
        lower[lay.I_FUN], upper[lay.I_FUN] = 0.0, p.f_u_max
        lower[lay.I_FUT], upper[lay.I_FUT] = -p.f_u_max, p.f_u_max
        state_lo = np.array(
            [THETA_BOUND, -math.pi, L_MIN, -RATE_BOUND_ANG, -RATE_BOUND_ANG, -RATE_BOUND_LEN]
        )
        state_hi = np.array(
            [math.pi - THETA_BOUND, math.pi, l_max, RATE_BOUND_ANG, RATE_BOUND_ANG,
             RATE_BOUND_LEN]
        )
        lower[lay.STATE_BASE : lay.fr_base] = np.tile(state_lo, n_states)
        upper[lay.STATE_BASE : lay.fr_base] = np.tile(state_hi, n_states)
        lower[lay.fr_base : lay.fr_base + n_states] = -p.f_r_max
        upper[lay.fr_base : lay.fr_base + n_states] = 0.0
        if lay.soft_terminal:
            lower[lay.i_slack], upper[lay.i_slack] = 0.0, scenario.slack_cap
        self.lower, self.upper = lower, upper

        scale = np.empty(lay.n_vars)
        scale[lay.I_TF] = max(1.0, self.t_f_guess)
        scale[lay.I_FUN] = scale[lay.I_FUT] = p.f_u_max / 3.0
        scale[lay.STATE_BASE : lay.fr_base] = np.tile(self.x_char, n_states)
        scale[lay.fr_base : lay.fr_base + n_states] = p.f_r_max / 2.0
        if lay.soft_terminal:
            scale[lay.i_slack] = max(scenario.slack_cap, 1e-2)
        self.scale = scale

        self.n_eq = 6 + 6 * scenario.n_knots + (0 if lay.soft_terminal else 3)
        self.n_ineq = (
            2 * n_states
            + (n_states if scenario.obstacle is not None else 0)
            + 3
            + (1 if lay.soft_terminal else 0)
        )
        self._build_patterns()
        self._cache_key = None
        self._cache_val: _Eval | None = None

    @property
    def n(self) -> int:
        return self.layout.n_vars

    # ---------------------------------------------------------------- patterns

    def _build_patterns(self):
        lay = self.layout
        N = lay.n_knots
        sb = lay.STATE_BASE
        frb = lay.fr_base
        blk = np.arange(6)

        rows, cols = [], []
        # Initial-state rows.
        rows.append(np.arange(6))
        cols.append(sb + blk)
        # Defect blocks w.r.t. x_k and x_{k+1}.
        drow = (6 + 6 * np.arange(N))[:, None, None] + blk[None, :, None]
        dcol = (sb + 6 * np.arange(N))[:, None, None] + blk[None, None, :]
        drow66 = np.broadcast_to(drow, (N, 6, 6))
        rows.append(drow66.ravel())
        cols.append(np.broadcast_to(dcol, (N, 6, 6)).ravel())
        rows.append(drow66.ravel())
        cols.append(np.broadcast_to(dcol + 6, (N, 6, 6)).ravel())
        # Defects w.r.t. hoist knots k and k+1 (l_ddot row only).
        r5 = 6 + 6 * np.arange(N) + 5
        rows.append(r5)
        cols.append(frb + np.arange(N))
        rows.append(r5)
        cols.append(frb + np.arange(N) + 1)
        # Defects w.r.t. the thrust amplitudes.
        rows.append(6 + 6 * np.arange(N) + 3)
        cols.append(np.full(N, lay.I_FUN))
        rows.append(6 + 6 * np.arange(N) + 4)
        cols.append(np.full(N, lay.I_FUT))
        # Defects w.r.t. t_f (all rows).
        rtf = (6 + 6 * np.arange(N))[:, None] + blk[None, :]
        rows.append(rtf.ravel())
        cols.append(np.full(6 * N, lay.I_TF))
        # Terminal position rows (hard mode).
        if not lay.soft_terminal:
            trow = 6 + 6 * N + np.arange(3)
            rows.append(np.repeat(trow, 3))
            cols.append(np.tile(sb + 6 * N + np.arange(3), 3))
        self._eq_rows = np.concatenate(rows)
        self._eq_cols = np.concatenate(cols)

        # Inequalities.
        n_states = lay.n_states
        rows, cols = [], []
        pos_cols = (sb + 6 * np.arange(n_states))[:, None] + np.arange(3)[None, :]
        wall_rows = np.arange(n_states)
        ceil_rows = n_states + np.arange(n_states)
        rows.append(np.repeat(wall_rows, 3))
        cols.append(pos_cols.ravel())
        rows.append(np.repeat(ceil_rows, 3))
        cols.append(pos_cols.ravel())
        nxt = 2 * n_states
        if self.scenario.obstacle is not None:
            obs_rows = nxt + np.arange(n_states)
            rows.append(np.repeat(obs_rows, 3))
            cols.append(pos_cols.ravel())
            nxt += n_states
        self._i_fric = nxt
        rows.append(np.array([nxt, nxt, nxt + 1, nxt + 1, nxt + 2, nxt + 2]))
        cols.append(
            np.array([lay.I_FUN, lay.I_FUT] * 3)
        )
        nxt += 3
        if lay.soft_terminal:
            rows.append(np.full(4, nxt))
            cols.append(
                np.array([lay.i_slack, sb + 6 * N + 0, sb + 6 * N + 1, sb + 6 * N + 2])
            )
        self._in_rows = np.concatenate(rows)
        self._in_cols = np.concatenate(cols)

    # ---------------------------------------------------------------- workspace

    def _eval(self, z: np.ndarray) -> _Eval:
        key = z.tobytes()
        if key == self._cache_key:
            return self._cache_val
        lay = self.layout
        p = self.scenario.params
        e = _Eval()
        e.t_f, e.f_un, e.f_ut, e.X, e.fr, e.slack = lay.unpack(z)
        N = lay.n_knots
        e.tau = np.arange(lay.n_states) / N
        e.t = e.tau * e.t_f
        e.h = e.t_f / N

        th = e.X[:, 0]
        el = e.X[:, 2]
        thd, phd, eld = e.X[:, 3], e.X[:, 4], e.X[:, 5]
        e.s, e.c = np.sin(th), np.cos(th)
        e.s_e = np.maximum(e.s, SIN_THETA_MIN)
        e.l_e = np.maximum(el, L_MIN)
        ds_mask = (e.s > SIN_THETA_MIN).astype(float)
        dl_mask = (el > L_MIN).astype(float)

        u = (e.t - p.t_center) / p.sigma
        e.gp = np.exp(-0.5 * u * u)
        e.gpd = e.gp * (-u / p.sigma)
        g = p.gravity
        m = p.mass

        if self._override is not None:
            U = np.column_stack([e.fr, np.full_like(e.fr, e.f_un), np.full_like(e.fr, e.f_ut)])
            e.f = np.asarray(self._override(e.X, U, e.t), dtype=float)
            e.A = None
            e.ft = np.zeros_like(e.X)
        else:
            a_n = e.f_un * e.gp / (m * e.l_e)
            a_t = e.f_ut * e.gp / (m * e.l_e * e.s_e)
            f = np.empty_like(e.X)
            f[:, 0] = thd
            f[:, 1] = phd
            f[:, 2] = eld
            f[:, 3] = (
                -2.0 * thd * eld / e.l_e + e.c * e.s * phd**2 - (g / e.l_e) * e.s + a_n
            )
            cot = e.c / e.s_e
            f[:, 4] = -2.0 * cot * thd * phd - 2.0 * phd * eld / e.l_e + a_t
            f[:, 5] = e.l_e * thd**2 + e.l_e * e.s**2 * phd**2 + g * e.c + e.fr / m
            e.f = f

            A = np.zeros((lay.n_states, 6, 6))
            A[:, 0, 3] = 1.0
            A[:, 1, 4] = 1.0
            A[:, 2, 5] = 1.0
            A[:, 3, 0] = (e.c**2 - e.s**2) * phd**2 - (g / e.l_e) * e.c
            A[:, 3, 2] = (
                2.0 * thd * eld / e.l_e**2
                + g * e.s / e.l_e**2
                - e.f_un * e.gp / (m * e.l_e**2)
            ) * dl_mask
            A[:, 3, 3] = -2.0 * eld / e.l_e
            A[:, 3, 4] = 2.0 * e.c * e.s * phd
            A[:, 3, 5] = -2.0 * thd / e.l_e
            dcot = (-e.s * e.s_e - e.c * e.c * ds_mask) / e.s_e**2
            A[:, 4, 0] = (
                -2.0 * thd * phd * dcot
                - e.f_ut * e.gp * e.c * ds_mask / (m * e.l_e * e.s_e**2)
            )
            A[:, 4, 2] = (
                2.0 * phd * eld / e.l_e**2 - e.f_ut * e.gp / (m * e.l_e**2 * e.s_e)
            ) * dl_mask
            A[:, 4, 3] = -2.0 * cot * phd
            A[:, 4, 4] = -2.0 * cot * thd - 2.0 * eld / e.l_e
            A[:, 4, 5] = -2.0 * phd / e.l_e
            A[:, 5, 0] = 2.0 * e.l_e * e.s * e.c * phd**2 - g * e.s
            A[:, 5, 2] = (thd**2 + e.s**2 * phd**2) * dl_mask
            A[:, 5, 3] = 2.0 * e.l_e * thd
            A[:, 5, 4] = 2.0 * e.l_e * e.s**2 * phd
            e.A = A

            ft = np.zeros_like(e.X)
            ft[:, 3] = e.f_un * e.gpd / (m * e.l_e)
            ft[:, 4] = e.f_ut * e.gpd / (m * e.l_e * e.s_e)
            e.ft = ft

        sp, cp = np.sin(e.X[:, 1]), np.cos(e.X[:, 1])
        pos = np.empty((lay.n_states, 3))
        pos[:, 0] = el * e.s * cp
        pos[:, 1] = el * e.s * sp
        pos[:, 2] = -el * e.c
        e.pos = pos
        pj = np.zeros((lay.n_states, 3, 3))
        pj[:, 0, 0] = el * e.c * cp
        pj[:, 0, 1] = -el * e.s * sp
        pj[:, 0, 2] = e.s * cp
        pj[:, 1, 0] = el * e.c * sp
        pj[:, 1, 1] = el * e.s * cp
        pj[:, 1, 2] = e.s * sp
        pj[:, 2, 0] = el * e.s
        pj[:, 2, 2] = -e.c
        e.posjac = pj

        if self.scenario.obstacle is not None:
            e.margin, e.margin_grad = model.obstacle_margin_arrays(
                pos[:, 0], pos[:, 1], pos[:, 2], self.scenario.obstacle
            )
        else:
            e.margin, e.margin_grad = None, None

        self._cache_key = key
        self._cache_val = e
        return e

    # ---------------------------------------------------------------- residuals

    def _defects_scaled(self, e: _Eval) -> np.ndarray:
        return (
            e.X[1:] - e.X[:-1] - 0.5 * e.h * (e.f[1:] + e.f[:-1])
        ) / (e.h * self.x_char[None, :])

    def defect_residuals(self, z: np.ndarray) -> np.ndarray:
        """Trapezoidal defects, 6N entries, per unit time and state scale."""
        return self._defects_scaled(self._eval(z)).ravel()

    def boundary_residuals(self, z: np.ndarray) -> np.ndarray:
        """Initial-state equalities plus, in hard mode, terminal position."""
        e = self._eval(z)
        init = (e.X[0] - self.x0_target) / self.x_char
        if self.layout.soft_terminal:
            return init
        term = (e.pos[-1] - self.p_f) / self.l_char
        return np.concatenate([init, term])

    def eq_residuals(self, z: np.ndarray) -> np.ndarray:
        e = self._eval(z)
        init = (e.X[0] - self.x0_target) / self.x_char
        parts = [init, self._defects_scaled(e).ravel()]
        if not self.layout.soft_terminal:
            parts.append((e.pos[-1] - self.p_f) / self.l_char)
        return np.concatenate(parts)

    def path_residuals(self, z: np.ndarray) -> np.ndarray:
        """Wall, ceiling, obstacle and thrust inequalities (>= 0 feasible)."""
        e = self._eval(z)
        p = self.scenario.params
        parts = [e.pos[:, 0] / self.l_char, -e.pos[:, 2] / self.l_char]
        if e.margin is not None:
            parts.append(e.margin)
        fs = p.f_u_max
        parts.append(
            np.array(
                [
                    (p.mu * e.f_un - e.f_ut) / fs,
                    (p.mu * e.f_un + e.f_ut) / fs,
                    (fs * fs - e.f_un**2 - e.f_ut**2) / (fs * fs),
                ]
            )
        )
        return np.concatenate(parts)

    def ineq_residuals(self, z: np.ndarray) -> np.ndarray:
        e = self._eval(z)
        parts = [self.path_residuals(z)]
        if self.layout.soft_terminal:
            d = e.pos[-1] - self.p_f
            parts.append(
                np.array([(e.slack - float(d @ d)) / self.l_char**2])
            )
        return np.concatenate(parts)

    # ---------------------------------------------------------------- objective

    def _trap_weights(self) -> np.ndarray:
        w = np.ones(self.layout.n_states)
        w[0] = w[-1] = 0.5
        return w

    def terminal_kinetic(self, z: np.ndarray) -> float:
        e = self._eval(z)
        m = self.scenario.params.mass
        th, el = e.X[-1, 0], e.X[-1, 2]
        thd, phd, eld = e.X[-1, 3], e.X[-1, 4], e.X[-1, 5]
        st = math.sin(th)
        return 0.5 * m * (el * el * (thd * thd + st * st * phd * phd) + eld * eld)

    def winding_integral(self, z: np.ndarray) -> float:
        """Trapezoidal integral of the squared hoist power, (F_r l_dot)^2."""
        e = self._eval(z)
        q = (e.fr * e.X[:, 5]) ** 2
        return float(e.h * (self._trap_weights() @ q))

    def objective(self, z: np.ndarray) -> float:
        w = self.scenario.weights
        e = self._eval(z)
        j = (
            w.time * e.t_f
            + w.terminal_kinetic * self.terminal_kinetic(z)
            + w.winding * self.winding_integral(z)
        )
        if self.layout.soft_terminal:
            j += w.slack * e.slack
        return float(j)

    def objective_gradient(self, z: np.ndarray) -> np.ndarray:
        lay = self.layout
        w = self.scenario.weights
        p = self.scenario.params
        e = self._eval(z)
        g = np.zeros(lay.n_vars)
        wind = self.winding_integral(z)
        g[lay.I_TF] = w.time + w.winding * wind / e.t_f
        wt = self._trap_weights()
        eld = e.X[:, 5]
        # Hoist-work term: d/d f_r and d/d l_dot at every knot.
        g[lay.fr_base : lay.fr_base + lay.n_states] = (
            w.winding * e.h * wt * 2.0 * e.fr * eld**2
        )
        ldot_cols = lay.STATE_BASE + 6 * np.arange(lay.n_states) + 5
        g[ldot_cols] += w.winding * e.h * wt * 2.0 * e.fr**2 * eld
        # Terminal kinetic energy.
        m = p.mass
        th, el = e.X[-1, 0], e.X[-1, 2]
        thd, phd, eldN = e.X[-1, 3], e.X[-1, 4], e.X[-1, 5]
        st, ct = math.sin(th), math.cos(th)
        base = lay.STATE_BASE + 6 * lay.n_knots
        g[base + 0] += w.terminal_kinetic * m * el * el * st * ct * phd * phd
        g[base + 2] += w.terminal_kinetic * m * el * (thd * thd + st * st * phd * phd)
        g[base + 3] += w.terminal_kinetic * m * el * el * thd
        g[base + 4] += w.terminal_kinetic * m * el * el * st * st * phd
        g[base + 5] += w.terminal_kinetic * m * eldN
        if lay.soft_terminal:
            g[lay.i_slack] += w.slack
        return g

    # ---------------------------------------------------------------- jacobians

    def eq_jacobian(self, z: np.ndarray) -> JacobianCOO:
        if self._override is not None:
            raise RuntimeError("jacobians unavailable with a dynamics override")
        lay = self.layout
        N = lay.n_knots
        e = self._eval(z)
        xc = self.x_char
        h = e.h
        m = self.scenario.params.mass
        eye = np.eye(6)[None, :, :]
        r = self._defects_scaled(e)

        data = [np.full(6, 1.0) / xc]
        data.append(((-eye - 0.5 * h * e.A[:-1]) / (h * xc[None, :, None])).ravel())
        data.append(((eye - 0.5 * h * e.A[1:]) / (h * xc[None, :, None])).ravel())
        dfr = np.full(N, -1.0 / (2.0 * m * xc[5]))
        data.append(dfr)
        data.append(dfr)
        gl = e.gp / (m * e.l_e)
        data.append(-(gl[:-1] + gl[1:]) / (2.0 * xc[3]))
        gls = e.gp / (m * e.l_e * e.s_e)
        data.append(-(gls[:-1] + gls[1:]) / (2.0 * xc[4]))
        dtf = (
            -(e.f[:-1] + e.f[1:]) / (2.0 * N)
            - 0.5 * h * (e.tau[:-1, None] * e.ft[:-1] + e.tau[1:, None] * e.ft[1:])
        ) / (h * xc[None, :]) - r / e.t_f
        data.append(dtf.ravel())
        if not lay.soft_terminal:
            data.append((e.posjac[-1] / self.l_char).ravel())
        return JacobianCOO(
            self._eq_rows, self._eq_cols, np.concatenate(data), (self.n_eq, lay.n_vars)
        )

    def ineq_jacobian(self, z: np.ndarray) -> JacobianCOO:
        if self._override is not None:
            raise RuntimeError("jacobians unavailable with a dynamics override")
        lay = self.layout
        e = self._eval(z)
        p = self.scenario.params
        data = [(e.posjac[:, 0, :] / self.l_char).ravel()]
        data.append((-e.posjac[:, 2, :] / self.l_char).ravel())
        if e.margin is not None:
            gx, gy, gz = e.margin_grad
            dm = (
                gx[:, None] * e.posjac[:, 0, :]
                + gy[:, None] * e.posjac[:, 1, :]
                + gz[:, None] * e.posjac[:, 2, :]
            )
            data.append(dm.ravel())
        fs = p.f_u_max
        data.append(
            np.array(
                [
                    p.mu / fs, -1.0 / fs,
                    p.mu / fs, 1.0 / fs,
                    -2.0 * e.f_un / fs**2, -2.0 * e.f_ut / fs**2,
                ]
            )
        )
        if lay.soft_terminal:
            d = e.pos[-1] - self.p_f
            grad_xn = -2.0 * (d @ e.posjac[-1]) / self.l_char**2
            data.append(
                np.concatenate([[1.0 / self.l_char**2], grad_xn])
            )
        return JacobianCOO(
            self._in_rows, self._in_cols, np.concatenate(data),
            (self.n_ineq, lay.n_vars),
        )

    def derivatives(self, z: np.ndarray):
        """Objective gradient plus equality and inequality Jacobians."""
        return self.objective_gradient(z), self.eq_jacobian(z), self.ineq_jacobian(z)

    # ---------------------------------------------------------------- guess

    def initial_guess(self) -> np.ndarray:
        lay = self.layout
        p = self.scenario.params
        th0, ph0, l0 = self.x0_target[0], self.x0_target[1], self.x0_target[2]
        thf, phf, lf = self.xf_position
        t_f = self.t_f_guess
        tau = np.arange(lay.n_states) / lay.n_knots
        states = np.empty((lay.n_states, 6))
        states[:, 0] = th0 + tau * (thf - th0)
        states[:, 1] = ph0 + tau * (phf - ph0)
        states[:, 2] = l0 + tau * (lf - l0)
        states[:, 3] = (thf - th0) / t_f
        states[:, 4] = (phf - ph0) / t_f
        states[:, 5] = (lf - l0) / t_f
        th_mid = 0.5 * (th0 + thf)
        fr = np.full(
            lay.n_states,
            float(np.clip(-p.mass * p.gravity * math.cos(th_mid) / 2.0, -p.f_r_max, 0.0)),
        )
        f_un = 0.1 * p.f_u_max
        dphi = phf - ph0
        f_ut = math.copysign(0.5 * p.mu * f_un, dphi) if dphi != 0.0 else 0.0
        z = lay.pack(t_f, f_un, f_ut, states, fr, slack=0.0)
        return np.clip(z, self.lower, self.upper)

    def decode(self, z: np.ndarray) -> DecodedVars:
        t_f, f_un, f_ut, states, fr, slack = self.layout.unpack(z)
        return DecodedVars(t_f, f_un, f_ut, states.copy(), fr.copy(), slack)

    def encode(self, d: DecodedVars) -> np.ndarray:
        return self.layout.pack(d.t_f, d.f_un, d.f_ut, d.states, d.f_r_knots, d.slack)


def _reject_bad_endpoints(scenario: Scenario):
    for name, pt in (("p_0", scenario.p_0), ("p_f", scenario.p_f)):
        if pt.x < 0.0:
            raise ValueError(f"{name} sits behind the wall plane (needs x >= 0)")
        if pt.z > 0.0:
            raise ValueError(f"{name} exceeds the anchor level (needs z <= 0)")


def build_problem(scenario: Scenario, dynamics_override=None) -> NlpProblem:
    """Assemble the transcribed NLP for a validated scenario."""
    return NlpProblem(scenario, dynamics_override=dynamics_override)


def initial_guess(scenario: Scenario) -> np.ndarray:
    return build_problem(scenario).initial_guess()


# -------------------------------------------------------------------- solution


@dataclass
class OcpSolution:
    """Converged (or best-effort) plan for one scenario."""

    scenario_digest: str
    n_knots: int
    soft_terminal: bool
    t_f: float
    f_un: float
    f_ut: float
    states: np.ndarray
    f_r_knots: np.ndarray
    slack: float
    cost_breakdown: dict
    status: str
    kkt_residual: float
    iterations: int
    max_eq_residual: float
    min_ineq_residual: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def knot_times(self) -> np.ndarray:
        return np.arange(self.n_knots + 1) / self.n_knots * self.t_f

    def decision_vector(self) -> np.ndarray:
        lay = DecisionLayout(self.n_knots, self.soft_terminal)
        return lay.pack(
            self.t_f, self.f_un, self.f_ut, self.states, self.f_r_knots, self.slack
        )

    def to_dict(self) -> dict:
        return {
            "scenario_hash": self.scenario_digest,
            "layout": {"n_knots": self.n_knots, "soft_terminal": self.soft_terminal},
            "t_f_s": self.t_f,
            "impulse_n": {"f_un": self.f_un, "f_ut": self.f_ut},
            "slack_m2": self.slack,
            "decision_vector": [repr(v) for v in self.decision_vector()],
            "cost_breakdown": self.cost_breakdown,
            "diagnostics": {
                "status": self.status,
                "kkt_residual": self.kkt_residual,
                "iterations": self.iterations,
                "max_eq_residual": self.max_eq_residual,
                "min_ineq_residual": self.min_ineq_residual,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_dict(doc: dict) -> "OcpSolution":
        lay = DecisionLayout(
            int(doc["layout"]["n_knots"]), bool(doc["layout"]["soft_terminal"])
        )
        z = np.array([float(v) for v in doc["decision_vector"]])
        t_f, f_un, f_ut, states, fr, slack = lay.unpack(z)
        diag = doc["diagnostics"]
        return OcpSolution(
            scenario_digest=doc["scenario_hash"],
            n_knots=lay.n_knots,
            soft_terminal=lay.soft_terminal,
            t_f=t_f,
            f_un=f_un,
            f_ut=f_ut,
            states=states.copy(),
            f_r_knots=fr.copy(),
            slack=slack,
            cost_breakdown=doc["cost_breakdown"],
            status=diag["status"],
            kkt_residual=float(diag["kkt_residual"]),
            iterations=int(diag["iterations"]),
            max_eq_residual=float(diag["max_eq_residual"]),
            min_ineq_residual=float(diag["min_ineq_residual"]),
        )

    @staticmethod
    def from_json(text: str) -> "OcpSolution":
        return OcpSolution.from_dict(json.loads(text))


def _interp_decision(prev: DecodedVars, problem: NlpProblem) -> np.ndarray:
    """Resample a coarse solution onto a finer knot grid as a warm start."""
    lay = problem.layout
    tau_old = np.linspace(0.0, 1.0, prev.states.shape[0])
    tau_new = np.linspace(0.0, 1.0, lay.n_states)
    states = np.column_stack(
        [np.interp(tau_new, tau_old, prev.states[:, j]) for j in range(6)]
    )
    fr = np.interp(tau_new, tau_old, prev.f_r_knots)
    z = lay.pack(prev.t_f, prev.f_un, prev.f_ut, states, fr, prev.slack)
    return np.clip(z, problem.lower, problem.upper)


def _snap_impulse(problem: NlpProblem, z: np.ndarray, tol: float = 1e-3) -> np.ndarray:
    """Project near-feasible thrust amplitudes exactly onto their limits."""
    lay = problem.layout
    p = problem.scenario.params
    f_un = max(float(z[lay.I_FUN]), 0.0)
    f_ut = float(z[lay.I_FUT])
    margin = p.mu * f_un - abs(f_ut)
    if -tol <= margin < 0.0:
        f_ut = math.copysign(p.mu * f_un, f_ut)
    norm = math.hypot(f_un, f_ut)
    if p.f_u_max < norm <= p.f_u_max + tol:
        shrink = p.f_u_max / norm
        f_un *= shrink
        f_ut *= shrink
    out = z.copy()
    out[lay.I_FUN] = f_un
    out[lay.I_FUT] = f_ut
    return out


def _relaxed_options(opts: SolverOptions) -> SolverOptions:
    return replace(
        opts,
        kkt_tol=max(opts.kkt_tol * 100.0, 1e-5),
        feas_tol=max(opts.feas_tol * 100.0, 1e-5),
        max_outer=min(opts.max_outer, 30),
        log_sink=None,
    )


def solve_scenario(
    scenario: Scenario,
    stages: list[int] | None = None,
    warm_start: OcpSolution | None = None,
    options: SolverOptions | None = None,
) -> OcpSolution:
    """Plan a jump: staged coarse-to-fine transcription solves.

    Coarse stages (or a caller-provided warm start) seed the full-size
    solve; the returned solution carries the independently re-evaluated
    feasibility certificate of the final decision vector.
    """
    opts = options if options is not None else scenario.solver_options
    prev: DecodedVars | None = None
    if warm_start is not None:
        prev = DecodedVars(
            warm_start.t_f, warm_start.f_un, warm_start.f_ut,
            warm_start.states, warm_start.f_r_knots, warm_start.slack,
        )
        plan: list[int] = []
    else:
        plan = stages if stages is not None else _stage_plan(scenario.n_knots)

    total_iterations = 0
    for n in plan:
        sub = replace(scenario, n_knots=n)
        prob = build_problem(sub)
        z0 = prob.initial_guess() if prev is None else _interp_decision(prev, prob)
        res = nlp_solve(prob, z0, _relaxed_options(opts))
        total_iterations += res.iterations
        prev = prob.decode(res.x)

    problem = build_problem(scenario)
    z0 = problem.initial_guess() if prev is None else _interp_decision(prev, problem)
    result = nlp_solve(problem, z0, opts)
    total_iterations += result.iterations

    z = _snap_impulse(problem, result.x)
    eq = problem.eq_residuals(z)
    ineq = problem.ineq_residuals(z)
    dec = problem.decode(z)
    w = scenario.weights
    kin = problem.terminal_kinetic(z)
    wind = problem.winding_integral(z)
    breakdown = {
        "time_s": dec.t_f,
        "terminal_kinetic_J": kin,
        "winding_integral_W2s": wind,
        "slack_m2": dec.slack,
        "weighted": {
            "time": w.time * dec.t_f,
            "terminal_kinetic": w.terminal_kinetic * kin,
            "winding": w.winding * wind,
            "slack": w.slack * dec.slack if scenario.soft_terminal else 0.0,
        },
        "total": problem.objective(z),
    }
    return OcpSolution(
        scenario_digest=scenario_hash(scenario),
        n_knots=scenario.n_knots,
        soft_terminal=scenario.soft_terminal,
        t_f=dec.t_f,
        f_un=dec.f_un,
        f_ut=dec.f_ut,
        states=dec.states,
        f_r_knots=dec.f_r_knots,
        slack=dec.slack,
        cost_breakdown=breakdown,
        status=result.status,
        kkt_residual=result.kkt_residual,
        iterations=total_iterations,
        max_eq_residual=float(np.max(np.abs(eq))) if eq.size else 0.0,
        min_ineq_residual=float(np.min(ineq)) if ineq.size else 0.0,
    )
