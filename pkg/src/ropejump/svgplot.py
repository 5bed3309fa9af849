"""Self-contained SVG figures (no external renderer).

Coordinates are rounded to fixed decimals so repeated runs emit
byte-identical documents; an optional metadata stamp is the only
non-deterministic element and is suppressed in deterministic mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _f(v: float) -> str:
    return f"{v:.2f}"


class Canvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def line(self, x1, y1, x2, y2, stroke="#333333", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"'
            f' stroke="{stroke}" stroke-width="{width}"{d}/>'
        )

    def polyline(self, pts, stroke="#1f77b4", width=1.5, dash=None, fill="none"):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.parts.append(
            f'<polyline points="{coords}" fill="{fill}" stroke="{stroke}"'
            f' stroke-width="{width}"{d}/>'
        )

    def polygon(self, pts, fill="#dddddd", stroke="none", opacity=1.0):
        coords = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        self.parts.append(
            f'<polygon points="{coords}" fill="{fill}" stroke="{stroke}"'
            f' fill-opacity="{opacity}"/>'
        )

    def circle(self, cx, cy, r, fill="#000000", stroke="none"):
        self.parts.append(
            f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="{fill}"'
            f' stroke="{stroke}"/>'
        )

    def rect(self, x, y, w, h, fill="#ffffff", stroke="none"):
        self.parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}"'
            f' fill="{fill}" stroke="{stroke}"/>'
        )

    def text(self, x, y, s, size=11, anchor="start", fill="#222222"):
        self.parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}"'
            f' font-family="sans-serif" text-anchor="{anchor}" fill="{fill}">{s}</text>'
        )

    def star(self, cx, cy, r, fill="#000000"):
        pts = []
        for i in range(10):
            ang = -math.pi / 2 + i * math.pi / 5
            rad = r if i % 2 == 0 else 0.4 * r
            pts.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
        self.polygon(pts, fill=fill)

    def render(self, stamp: str | None = None) -> str:
        meta = f"<metadata>{stamp}</metadata>\n" if stamp else ""
        body = "\n".join(self.parts)
        return (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}"'
            f' height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'{meta}<rect width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
            f"{body}\n</svg>\n"
        )


def energy_color(v: float) -> str:
    """Map a normalized value in [0, 1] to a blue-to-red ramp."""
    stops = [
        (0.0, (40, 53, 147)),
        (0.33, (0, 150, 136)),
        (0.66, (253, 216, 53)),
        (1.0, (198, 40, 40)),
    ]
    v = min(max(v, 0.0), 1.0)
    for (a, ca), (b, cb) in zip(stops[:-1], stops[1:]):
        if v <= b:
            w = 0.0 if b == a else (v - a) / (b - a)
            r, g, bl = (round(x + w * (y - x)) for x, y in zip(ca, cb))
            return f"#{r:02x}{g:02x}{bl:02x}"
    return "#c62828"


@dataclass
class _Proj:
    """Oblique projection of anchor-frame points onto the drawing plane."""

    ox: float
    oy: float
    su: float
    sv: float
    umin: float
    wmax: float
    KX = 0.42
    KZ = 0.24

    @staticmethod
    def uw(p) -> tuple[float, float]:
        x, y, z = p
        return y + _Proj.KX * x, z + _Proj.KZ * x

    def to_screen(self, p) -> tuple[float, float]:
        u, w = self.uw(p)
        return self.ox + self.su * (u - self.umin), self.oy + self.sv * (self.wmax - w)


def plot_solution(solution, scenario, traj=None) -> Canvas:
    """Fig-style jump view: wall, pillar, wedge, path, plus force strips."""
    from .reach import friction_wedge  # local import avoids a cycle

    width, height = 640, 900
    cv = Canvas(width, height)
    p0 = scenario.p_0.as_array()
    pf = scenario.p_f.as_array()
    path = traj.cartesian if traj is not None else None
    if path is None:
        th = solution.states[:, 0]
        ph = solution.states[:, 1]
        el = solution.states[:, 2]
        path = np.column_stack(
            [el * np.sin(th) * np.cos(ph), el * np.sin(th) * np.sin(ph), -el * np.cos(th)]
        )

    pts = [(0.0, 0.0, 0.0), tuple(p0), tuple(pf)]
    pts += [tuple(row) for row in path[:: max(1, len(path) // 200)]]
    wall_y = (min(p[1] for p in pts) - 2.0, max(p[1] for p in pts) + 2.0)
    wall_z = (min(p[2] for p in pts) - 2.0, 1.0)
    wall = [
        (0.0, wall_y[0], wall_z[0]),
        (0.0, wall_y[1], wall_z[0]),
        (0.0, wall_y[1], wall_z[1]),
        (0.0, wall_y[0], wall_z[1]),
    ]
    cone_pts = []
    if scenario.obstacle is not None:
        cone = scenario.obstacle
        b = cone.base_center.as_array()
        a = cone.axis.as_array()
        ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(a, ref)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        ring = [
            tuple(b + cone.base_radius * (math.cos(t) * e1 + math.sin(t) * e2))
            for t in np.linspace(0.0, 2.0 * math.pi, 49)
        ]
        cone_pts = ring + [tuple(b + cone.height * a)]
        pts += cone_pts

    uws = [_Proj.uw(p) for p in pts + wall]
    umin = min(u for u, _ in uws)
    umax = max(u for u, _ in uws)
    wmin = min(w for _, w in uws)
    wmax = max(w for _, w in uws)
    box = 540.0
    span = max(umax - umin, wmax - wmin, 1e-9)
    s = box / span
    proj = _Proj(ox=50.0, oy=40.0, su=s, sv=s, umin=umin, wmax=wmax)

    cv.polygon([proj.to_screen(p) for p in wall], fill="#dce9f5", opacity=0.8)
    if cone_pts:
        ring, apex = cone_pts[:-1], cone_pts[-1]
        cv.polyline([proj.to_screen(p) for p in ring], stroke="#8d6e63", width=1.0)
        for p in ring[::8]:
            sx, sy = proj.to_screen(p)
            ax, ay = proj.to_screen(apex)
            cv.line(sx, sy, ax, ay, stroke="#8d6e63", width=0.6)

    wedge = friction_wedge(scenario.p_0, scenario.params.mu)
    for dx, dy in wedge.rays():
        tip = (p0[0] + 8.0 * dx, p0[1] + 8.0 * dy, p0[2])
        x1, y1 = proj.to_screen(tuple(p0))
        x2, y2 = proj.to_screen(tip)
        cv.line(x1, y1, x2, y2, stroke="#d32f2f", width=1.2, dash="6,4")

    cv.polyline([proj.to_screen(tuple(p)) for p in path], stroke="#1f77b4", width=2.0)
    ax, ay = proj.to_screen((0.0, 0.0, 0.0))
    cv.star(ax, ay, 8.0, fill="#000000")
    sx, sy = proj.to_screen(tuple(p0))
    cv.circle(sx, sy, 5.0, fill="#2e7d32")
    sx, sy = proj.to_screen(tuple(pf))
    cv.circle(sx, sy, 5.0, fill="#c62828")
    cv.text(20, 20, "jump plan (oblique view), wall plane x=0", size=13)

    # Hoist-force strip.
    t = solution.knot_times()
    fr = solution.f_r_knots
    x0s, y0s, wplot, hplot = 60.0, 640.0, 520.0, 110.0
    cv.rect(x0s, y0s, wplot, hplot, fill="#fafafa", stroke="#cccccc")
    f_lo = min(float(np.min(fr)), -1.0)
    pts2 = [
        (
            x0s + wplot * ti / max(solution.t_f, 1e-9),
            y0s + hplot * (0.0 - fi) / (0.0 - f_lo),
        )
        for ti, fi in zip(t, fr)
    ]
    cv.polyline(pts2, stroke="#6a1b9a", width=1.5)
    cv.text(x0s, y0s - 6, f"hoist force f_r(t) [N], min {f_lo:.1f}", size=11)

    # Thrust-profile strip.
    y1s = 800.0
    cv.rect(x0s, y1s, wplot, 70.0, fill="#fafafa", stroke="#cccccc")
    p = scenario.params
    tt = np.linspace(0.0, min(max(10.0 * p.sigma, 1e-6), solution.t_f), 200)
    gg = np.exp(-0.5 * ((tt - p.t_center) / p.sigma) ** 2)
    pts3 = [
        (x0s + wplot * ti / max(tt[-1], 1e-9), y1s + 70.0 * (1.0 - gi))
        for ti, gi in zip(tt, gg)
    ]
    cv.polyline(pts3, stroke="#ef6c00", width=1.5)
    cv.text(
        x0s, y1s - 6,
        f"thrust profile (unit peak), f_un {solution.f_un:.1f} N /"
        f" f_ut {solution.f_ut:.1f} N", size=11,
    )
    return cv


def plot_reach(rmap, wedge, scenario) -> Canvas:
    """Top view (X-Y) of the target grid colored by hoist energy."""
    width, height = 700, 560
    cv = Canvas(width, height)
    g = rmap.grid
    xs = [c.target.x for c in rmap.cells] + [0.0, scenario.p_0.x]
    ys = [c.target.y for c in rmap.cells] + [0.0, scenario.p_0.y]
    x_lo, x_hi = min(xs) - 0.8, max(xs) + 0.8
    y_lo, y_hi = min(ys) - 0.8, max(ys) + 0.8
    box_w, box_h = 560.0, 480.0
    s = min(box_w / (x_hi - x_lo), box_h / (y_hi - y_lo))

    def scr(x, y):
        return 50.0 + s * (x - x_lo), 40.0 + s * (y_hi - y)

    reached = rmap.reached()
    emax = max((c.winding_energy for c in reached), default=1.0)
    emin = min((c.winding_energy for c in reached), default=0.0)
    for c in rmap.cells:
        px, py = scr(c.target.x, c.target.y)
        if c.status == "reached":
            v = 0.0 if emax <= emin else (c.winding_energy - emin) / (emax - emin)
            cv.circle(px, py, 6.0, fill=energy_color(v))
        else:
            cv.line(px - 4, py - 4, px + 4, py + 4, stroke="#9e9e9e", width=1.2)
            cv.line(px - 4, py + 4, px + 4, py - 4, stroke="#9e9e9e", width=1.2)

    for dx, dy in wedge.rays():
        x1, y1 = scr(wedge.apex_x, wedge.apex_y)
        reach_len = max(x_hi - x_lo, y_hi - y_lo) * 1.5
        x2, y2 = scr(wedge.apex_x + reach_len * dx, wedge.apex_y + reach_len * dy)
        cv.line(x1, y1, x2, y2, stroke="#d32f2f", width=1.5)

    axs, ays = scr(0.0, 0.0)
    cv.star(axs, ays, 9.0, fill="#000000")
    psx, psy = scr(scenario.p_0.x, scenario.p_0.y)
    cv.circle(psx, psy, 7.0, fill="#2e7d32")
    cv.text(20, 20, f"reachable targets at Z = {g.z} m (mu = {scenario.params.mu})", size=13)

    # Color bar.
    bar_x, bar_y, bar_h = 640.0, 60.0, 360.0
    for i in range(60):
        v = 1.0 - i / 59.0
        cv.rect(bar_x, bar_y + i * bar_h / 60.0, 18.0, bar_h / 60.0 + 0.5,
                fill=energy_color(v))
    cv.text(bar_x - 4, bar_y - 8, f"{emax:.0f} J", size=10, anchor="start")
    cv.text(bar_x - 4, bar_y + bar_h + 14, f"{emin:.0f} J", size=10, anchor="start")
    cv.text(bar_x, bar_y + bar_h + 30, "hoist energy", size=10)
    return cv
