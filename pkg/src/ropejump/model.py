"""Variable-length spherical pendulum model of the rope-hung robot.

The robot body is a point mass m suspended from a fixed anchor by an
inextensible rope of controllable length l.  The anchor frame has its
origin at the anchor, the climbing wall in the plane x = 0, and z up,
so every admissible position has X >= 0 and Z <= 0.  Coordinates are
the pitch angle theta (from the straight-down vertical), the yaw angle
phi (about the vertical axis) and the rope length l:

    X = l sin(theta) cos(phi)
    Y = l sin(theta) sin(phi)
    Z = -l cos(theta)

Actuation is a hoist force f_r along the rope (pull-only, f_r <= 0)
plus a short leg thrust at lift-off decomposed into a wall-normal
amplitude f_un and a tangential amplitude f_ut.  The thrust follows a
unit-peak Gaussian time profile of width sigma centred at t_center, so
the amplitudes are bounded pointwise by the actuator and friction-cone
limits at every instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81

# Singularity guards: the angular accelerations divide by l and sin(theta).
L_MIN = 0.05
SIN_THETA_MIN = 1e-3

# Width of the smooth cap blend of the obstacle margin, as a fraction of
# the smaller cone dimension.
_CONE_BLEND_FRACTION = 0.05


class GuardError(ValueError):
    """State too close to a coordinate singularity to evaluate dynamics."""


@dataclass(frozen=True)
class Vec3:
    """Cartesian point or vector in the anchor frame, metres."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class State:
    """Pendulum generalized coordinates and rates.

    theta, phi in rad; l in m; rates in rad/s and m/s.  l must stay
    positive, and theta must stay inside (0, pi) wherever the yaw
    dynamics are evaluated.
    """

    theta: float
    phi: float
    l: float
    theta_dot: float
    phi_dot: float
    l_dot: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.theta, self.phi, self.l, self.theta_dot, self.phi_dot, self.l_dot],
            dtype=float,
        )

    @staticmethod
    def from_array(a) -> "State":
        return State(*(float(v) for v in a))


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of a State."""

    theta_dot: float
    phi_dot: float
    l_dot: float
    theta_ddot: float
    phi_ddot: float
    l_ddot: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.theta_dot,
                self.phi_dot,
                self.l_dot,
                self.theta_ddot,
                self.phi_ddot,
                self.l_ddot,
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class Control:
    """Actuator setting: hoist force plus thrust amplitudes, all in N.

    f_r is the force along the rope (pull-only, so -f_r_max <= f_r <= 0).
    f_un / f_ut are the wall-normal and tangential thrust amplitudes;
    the delivered force at time t is (f_un, f_ut) * impulse_profile(t).
    """

    f_r: float = 0.0
    f_un: float = 0.0
    f_ut: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.f_r, self.f_un, self.f_ut], dtype=float)


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the robot and the thrust profile.

    sigma defaults to t_thrust / 6 (the profile support is about six
    standard deviations) and t_center to 3 * sigma so the burst sits
    just inside the start of the horizon.
    """

    mass: float = 5.0
    gravity: float = GRAVITY
    mu: float = 0.7
    f_u_max: float = 1000.0
    f_r_max: float = 200.0
    t_thrust: float = 0.025
    sigma: float = field(default=0.0)
    t_center: float = field(default=0.0)

    def __post_init__(self):
        if self.sigma == 0.0:
            object.__setattr__(self, "sigma", self.t_thrust / 6.0)
        if self.t_center == 0.0:
            object.__setattr__(self, "t_center", 3.0 * self.sigma)
        for name in ("mass", "gravity", "f_u_max", "f_r_max", "t_thrust", "sigma"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.mu < 0.0:
            raise ValueError("mu must be non-negative")
        if self.t_center < 3.0 * self.sigma - 1e-12:
            raise ValueError("t_center must be at least 3*sigma")


@dataclass(frozen=True)
class ObstacleCone:
    """Solid cone obstacle (a rock pillar) attached to the wall.

    The cone stands on the disc of radius base_radius centred at
    base_center, tapers linearly to the apex at base_center +
    height * axis, and is treated as forbidden volume.
    """

    base_center: Vec3
    axis: Vec3
    height: float
    base_radius: float

    def __post_init__(self):
        if self.height <= 0.0:
            raise ValueError("height must be strictly positive")
        if self.base_radius <= 0.0:
            raise ValueError("base_radius must be strictly positive")
        if abs(self.axis.norm() - 1.0) > 1e-9:
            raise ValueError("axis must be a unit vector")

    @property
    def apex(self) -> Vec3:
        return Vec3(
            self.base_center.x + self.height * self.axis.x,
            self.base_center.y + self.height * self.axis.y,
            self.base_center.z + self.height * self.axis.z,
        )


def cartesian_position(s: State) -> Vec3:
    """Map pendulum coordinates to the Cartesian position of the mass."""
    st, ct = math.sin(s.theta), math.cos(s.theta)
    sp, cp = math.sin(s.phi), math.cos(s.phi)
    return Vec3(s.l * st * cp, s.l * st * sp, -s.l * ct)


def cartesian_velocity(s: State) -> Vec3:
    """Cartesian velocity of the mass (time derivative of the position)."""
    st, ct = math.sin(s.theta), math.cos(s.theta)
    sp, cp = math.sin(s.phi), math.cos(s.phi)
    vx = s.l * ct * cp * s.theta_dot - s.l * st * sp * s.phi_dot + st * cp * s.l_dot
    vy = s.l * ct * sp * s.theta_dot + s.l * st * cp * s.phi_dot + st * sp * s.l_dot
    vz = s.l * st * s.theta_dot - ct * s.l_dot
    return Vec3(vx, vy, vz)


def spherical_from_cartesian(p: Vec3) -> tuple[float, float, float]:
    """Invert the position map: returns (theta, phi, l).

    theta = atan2(sqrt(X^2 + Y^2), -Z) so the roundtrip with
    cartesian_position is exact; phi is 0 by convention when the point
    lies on the vertical axis.  Raises ValueError at the origin.
    """
    r_xy = math.hypot(p.x, p.y)
    l = math.sqrt(p.x * p.x + p.y * p.y + p.z * p.z)
    if l == 0.0:
        raise ValueError("cannot invert the position map at the anchor origin")
    theta = math.atan2(r_xy, -p.z)
    phi = math.atan2(p.y, p.x) if r_xy > 0.0 else 0.0
    return theta, phi, l


def impulse_profile(t: float, p: PhysicalParams) -> float:
    """Unit-peak Gaussian thrust profile at time t; in [0, 1]."""
    u = (t - p.t_center) / p.sigma
    return math.exp(-0.5 * u * u)


def _check_guards(s: State):
    if s.l < L_MIN:
        raise GuardError(f"rope length l={s.l:.4g} below guard {L_MIN}")
    if math.sin(s.theta) < SIN_THETA_MIN:
        raise GuardError(
            f"sin(theta) = {math.sin(s.theta):.4g} below guard {SIN_THETA_MIN}"
            f" at theta={s.theta:.4g}"
        )


def dynamics(s: State, c: Control, p: PhysicalParams, t: float) -> StateDerivative:
    """State derivative of the pendulum under hoist force and thrust.

    The thrust amplitudes act through the Gaussian profile at time t;
    the hoist force acts directly.  Raises GuardError when l or
    sin(theta) is below its singularity guard.
    """
    _check_guards(s)
    st, ct = math.sin(s.theta), math.cos(s.theta)
    g = p.gravity
    gp = impulse_profile(t, p)
    th_dd = (
        -2.0 * s.theta_dot * s.l_dot / s.l
        + ct * st * s.phi_dot**2
        - (g / s.l) * st
        + c.f_un * gp / (p.mass * s.l)
    )
    ph_dd = (
        -2.0 * (ct / st) * s.theta_dot * s.phi_dot
        - 2.0 * s.phi_dot * s.l_dot / s.l
        + c.f_ut * gp / (p.mass * s.l * st)
    )
    l_dd = (
        s.l * s.theta_dot**2
        + s.l * st * st * s.phi_dot**2
        + g * ct
        + c.f_r / p.mass
    )
    return StateDerivative(s.theta_dot, s.phi_dot, s.l_dot, th_dd, ph_dd, l_dd)


def kinetic_energy(s: State, p: PhysicalParams) -> float:
    """K = (m/2) l^2 (theta_dot^2 + sin^2(theta) phi_dot^2) + (m/2) l_dot^2."""
    st = math.sin(s.theta)
    return 0.5 * p.mass * (
        s.l * s.l * (s.theta_dot**2 + st * st * s.phi_dot**2) + s.l_dot**2
    )


def potential_energy(s: State, p: PhysicalParams) -> float:
    """V = -m g l cos(theta), zero level at the anchor."""
    return -p.mass * p.gravity * s.l * math.cos(s.theta)


def total_energy(s: State, p: PhysicalParams) -> float:
    return kinetic_energy(s, p) + potential_energy(s, p)


def friction_cone_margin(f_un: float, f_ut: float, mu: float) -> float:
    """mu * f_un - |f_ut|; the thrust pair is admissible iff >= 0."""
    return mu * f_un - abs(f_ut)


def obstacle_margin_arrays(
    px: np.ndarray, py: np.ndarray, pz: np.ndarray, cone: ObstacleCone
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Vectorized obstacle margin and its Cartesian gradient.

    The margin is the radial distance from the cone axis minus the
    linear radius profile, smoothly blended with the axial distance
    below the base so that every point outside the closed cone volume
    gets a non-negative value.  Returns (margin, (dm/dx, dm/dy, dm/dz)).
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    pz = np.asarray(pz, dtype=float)
    b = cone.base_center
    ax, ay, az = cone.axis.x, cone.axis.y, cone.axis.z
    vx, vy, vz = px - b.x, py - b.y, pz - b.z
    s = vx * ax + vy * ay + vz * az
    ux, uy, uz = vx - s * ax, vy - s * ay, vz - s * az
    r = np.sqrt(ux * ux + uy * uy + uz * uz)
    r_safe = np.maximum(r, 1e-12)

    # Lateral branch: radial distance minus the (extrapolated) linear profile.
    slope = cone.base_radius / cone.height
    a_val = r - (cone.base_radius - slope * s)
    dax = ux / r_safe + slope * ax
    day = uy / r_safe + slope * ay
    daz = uz / r_safe + slope * az

    # Base branch: axial distance below the base plane.
    b_val = -s

    delta = _CONE_BLEND_FRACTION * min(cone.base_radius, cone.height)
    d = a_val - b_val
    margin = np.where(d >= delta, a_val, b_val)
    blend = np.abs(d) < delta
    if np.any(blend):
        margin = np.where(
            blend, b_val + (d + delta) ** 2 / (4.0 * delta), margin
        )
    # Gradient: w = d(margin)/d(a_val) in [0, 1], the rest goes to b_val.
    w = np.where(d >= delta, 1.0, 0.0)
    w = np.where(blend, (d + delta) / (2.0 * delta), w)
    gx = w * dax + (1.0 - w) * (-ax)
    gy = w * day + (1.0 - w) * (-ay)
    gz = w * daz + (1.0 - w) * (-az)
    return margin, (gx, gy, gz)


def obstacle_margin(point: Vec3, cone: ObstacleCone) -> float:
    """Signed clearance of a point from the cone: >= 0 outside, < 0 inside."""
    m, _ = obstacle_margin_arrays(
        np.array([point.x]), np.array([point.y]), np.array([point.z]), cone
    )
    return float(m[0])


def cone_contains(point: Vec3, cone: ObstacleCone) -> bool:
    """Exact membership test for the closed cone volume (test oracle)."""
    v = point.as_array() - cone.base_center.as_array()
    a = cone.axis.as_array()
    s = float(v @ a)
    if s < 0.0 or s > cone.height:
        return False
    r = float(np.linalg.norm(v - s * a))
    return r <= cone.base_radius * (1.0 - s / cone.height)
