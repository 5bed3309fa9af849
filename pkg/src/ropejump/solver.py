"""Augmented-Lagrangian solver for smooth nonlinear programs.

The outer loop maintains Lagrange multiplier estimates for equality
constraints c(x) = 0 and inequality constraints g(x) >= 0 and grows a
quadratic penalty whenever feasibility stalls.  Each outer iteration
minimizes the augmented Lagrangian subject to the variable bounds with
a projected limited-memory quasi-Newton method using a backtracking
Armijo line search on the projected path.

A problem is any object with:

    n                      number of decision variables
    lower, upper           bound arrays (+-inf allowed)
    scale                  characteristic variable magnitudes or None
    objective(x)           scalar
    objective_gradient(x)  array of size n
    eq_residuals(x)        array (empty when unconstrained)
    ineq_residuals(x)      array, feasible iff >= 0
    eq_jacobian(x), ineq_jacobian(x)
                           dense ndarray or any object with t_dot(w)

Everything is deterministic: identical inputs and options produce
identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass
class SolverOptions:
    max_outer: int = 50
    max_inner: int = 500
    kkt_tol: float = 1e-6
    feas_tol: float = 1e-6
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    penalty_cap: float = 1e10
    # Grow the penalty when the infeasibility shrank by less than this factor.
    feas_improvement: float = 0.1
    multiplier_max: float = 1e12
    memory: int = 10
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_line_search: int = 40
    inner_tol0: float = 1e-2
    inner_tol_shrink: float = 0.2
    log_sink: Optional[Callable[[str], None]] = None

    def __post_init__(self):
        if self.kkt_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty_growth <= 1.0:
            raise ValueError("penalty growth factor must exceed 1")


@dataclass
class SolveResult:
    status: str  # converged | max-iter | infeasible-stationary | numeric-failure
    x: np.ndarray
    multipliers: dict
    kkt_residual: float
    feasibility: float
    cost: float
    history: list = field(default_factory=list)
    iterations: int = 0  # total inner iterations
    n_outer: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _jt_dot(jac, w: np.ndarray, n: int) -> np.ndarray:
    if jac is None:
        return np.zeros(n)
    if isinstance(jac, np.ndarray):
        return jac.T @ w
    return jac.t_dot(w)


def _bounds_of(problem) -> tuple[np.ndarray, np.ndarray]:
    n = problem.n
    lower = getattr(problem, "lower", None)
    upper = getattr(problem, "upper", None)
    lb = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    ub = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    return lb, ub


def kkt_residual(problem, vars: np.ndarray, multipliers: dict) -> float:
    """Infinity norm of stationarity, complementarity and feasibility.

    Stationarity is measured as the projected gradient of the
    Lagrangian onto the bound box; each component is divided by
    1 + ||vars||_inf.
    """
    x = np.asarray(vars, dtype=float)
    lb, ub = _bounds_of(problem)
    lam = np.asarray(multipliers.get("eq", np.zeros(0)), dtype=float)
    mu = np.asarray(multipliers.get("ineq", np.zeros(0)), dtype=float)

    grad = problem.objective_gradient(x).copy()
    feas = 0.0
    comp = 0.0
    ceq = problem.eq_residuals(x)
    if ceq.size:
        grad -= _jt_dot(problem.eq_jacobian(x), lam, x.size)
        feas = max(feas, float(np.max(np.abs(ceq))))
    cin = problem.ineq_residuals(x)
    if cin.size:
        grad -= _jt_dot(problem.ineq_jacobian(x), mu, x.size)
        feas = max(feas, float(np.max(np.maximum(-cin, 0.0))))
        comp = float(np.max(np.abs(mu * cin)))

    stat = float(np.max(np.abs(x - np.clip(x - grad, lb, ub)))) if x.size else 0.0
    denom = 1.0 + (float(np.max(np.abs(x))) if x.size else 0.0)
    return max(stat, comp, feas) / denom


def _two_loop(g: np.ndarray, mem: list, h0: np.ndarray | None) -> np.ndarray:
    if not mem:
        return -(h0 * g) if h0 is not None else -g
    q = g.copy()
    alphas = []
    for s, y, r in reversed(mem):
        a = r * (s @ q)
        alphas.append(a)
        q -= a * y
    s_l, y_l, _ = mem[-1]
    if h0 is not None:
        q *= h0 * ((s_l @ y_l) / (y_l @ (h0 * y_l)))
    else:
        q *= (s_l @ y_l) / (y_l @ y_l)
    for (s, y, r), a in zip(mem, reversed(alphas)):
        b = r * (y @ q)
        q += (a - b) * s
    return -q


def _minimize_bound(val_grad, x0, lb, ub, gtol, max_iter, opts: SolverOptions, h0=None):
    """Projected L-BFGS with backtracking; returns (x, f, g, iters, alpha, status).

    h0 is an optional diagonal seed for the inverse-Hessian (a
    preconditioner built from the penalty curvature).
    """
    x = np.clip(x0, lb, ub)
    f, g = val_grad(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return x, f, g, 0, 0.0, "numeric"
    mem: list = []
    alpha_last = 0.0
    for it in range(max_iter):
        pg = x - np.clip(x - g, lb, ub)
        if np.max(np.abs(pg)) <= gtol:
            return x, f, g, it, alpha_last, "converged"

        tried_steepest = False
        d = _two_loop(g, mem, h0)
        if g @ d > -1e-14 * np.linalg.norm(g) * np.linalg.norm(d):
            mem.clear()
            d = _two_loop(g, mem, h0)
            tried_steepest = True

        accepted = False
        while True:
            if mem or h0 is not None:
                alpha = 1.0
            else:
                alpha = min(1.0, 1.0 / max(1e-10, np.max(np.abs(g))))
            for _ in range(opts.max_line_search):
                x_new = np.clip(x + alpha * d, lb, ub)
                step = x_new - x
                if not np.any(step):
                    break
                f_new, g_new = val_grad(x_new)
                slope = g @ step
                if np.isfinite(f_new) and slope < 0 and (
                    f_new <= f + opts.armijo_c1 * slope
                ):
                    accepted = True
                    break
                alpha *= opts.backtrack
            if accepted or tried_steepest:
                break
            # Quasi-Newton step failed: restart from the seed direction.
            mem.clear()
            d = _two_loop(g, mem, h0)
            tried_steepest = True
        if not accepted:
            return x, f, g, it, alpha_last, "stalled"

        s_step = x_new - x
        y_step = g_new - g
        sy = s_step @ y_step
        if sy > 1e-10 * np.linalg.norm(s_step) * np.linalg.norm(y_step):
            mem.append((s_step, y_step, 1.0 / sy))
            if len(mem) > opts.memory:
                mem.pop(0)
        x, f, g = x_new, f_new, g_new
        alpha_last = alpha
    return x, f, g, max_iter, alpha_last, "max-inner"


class _ScaledProblem:
    """Variable-scaling adapter: the solver works on y = x / scale."""

    def __init__(self, problem, scale: np.ndarray):
        self.inner = problem
        self.s = scale
        self.n = problem.n
        lb, ub = _bounds_of(problem)
        self.lower = lb / scale
        self.upper = ub / scale

    def x_of(self, y):
        return self.s * y

    def objective(self, y):
        return self.inner.objective(self.s * y)

    def objective_gradient(self, y):
        return self.s * self.inner.objective_gradient(self.s * y)

    def eq_residuals(self, y):
        return self.inner.eq_residuals(self.s * y)

    def ineq_residuals(self, y):
        return self.inner.ineq_residuals(self.s * y)

    def jt_eq(self, y, w):
        return self.s * _jt_dot(self.inner.eq_jacobian(self.s * y), w, self.n)

    def jt_ineq(self, y, w):
        return self.s * _jt_dot(self.inner.ineq_jacobian(self.s * y), w, self.n)

    def _col_sq(self, jac, row_weight=None) -> np.ndarray:
        if isinstance(jac, np.ndarray):
            j = jac * self.s[None, :]
            if row_weight is not None:
                j = j * row_weight[:, None]
            return (j * j).sum(axis=0)
        data = jac.data * self.s[jac.cols]
        if row_weight is not None:
            data = data * row_weight[jac.rows]
        return np.bincount(jac.cols, weights=data * data, minlength=self.n)

    def curvature_diag(self, y, rho, mu) -> np.ndarray:
        """Gauss-Newton diagonal of the augmented-Lagrangian Hessian."""
        x = self.s * y
        d = np.zeros(self.n)
        if mu.size or self.inner.ineq_residuals(x).size:
            gi = self.inner.ineq_residuals(x)
            if gi.size:
                active = (mu - rho * gi > 0.0).astype(float)
                d += self._col_sq(self.inner.ineq_jacobian(x), active)
        ceq = self.inner.eq_residuals(x)
        if ceq.size:
            d += self._col_sq(self.inner.eq_jacobian(x))
        return rho * d


def solve(problem, x_init, opts: SolverOptions | None = None) -> SolveResult:
    """Solve the NLP from x_init (projected into the bounds)."""
    opts = opts or SolverOptions()
    n = problem.n
    scale = getattr(problem, "scale", None)
    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
    sp = _ScaledProblem(problem, scale)

    y = np.clip(np.asarray(x_init, dtype=float) / scale, sp.lower, sp.upper)
    ceq = sp.eq_residuals(y)
    cin = sp.ineq_residuals(y)
    f0 = sp.objective(y)
    if not (np.isfinite(f0) and np.all(np.isfinite(ceq)) and np.all(np.isfinite(cin))):
        return SolveResult(
            status="numeric-failure",
            x=sp.x_of(y),
            multipliers={"eq": np.zeros(ceq.size), "ineq": np.zeros(cin.size)},
            kkt_residual=np.inf,
            feasibility=np.inf,
            cost=f0,
        )

    lam = np.zeros(ceq.size)
    mu = np.zeros(cin.size)
    rho = opts.penalty0
    constrained = ceq.size + cin.size > 0
    omega = opts.inner_tol0 if constrained else 0.5 * opts.kkt_tol

    def al_val_grad(yv):
        fv = sp.objective(yv)
        gv = sp.objective_gradient(yv)
        c = sp.eq_residuals(yv)
        if c.size:
            fv += -(lam @ c) + 0.5 * rho * (c @ c)
            gv = gv + sp.jt_eq(yv, rho * c - lam)
        gi = sp.ineq_residuals(yv)
        if gi.size:
            act = np.maximum(0.0, mu - rho * gi)
            fv += float(act @ act - mu @ mu) / (2.0 * rho)
            gv = gv + sp.jt_ineq(yv, -act)
        return fv, gv

    history: list = []
    total_inner = 0
    status = "max-iter"
    feas_best = np.inf
    stall_count = 0
    kkt = np.inf
    feas = np.inf
    cost = f0
    n_outer = 0

    for outer in range(opts.max_outer):
        n_outer = outer + 1
        h0 = None
        if constrained:
            curv = sp.curvature_diag(y, rho, mu)
            h0 = 1.0 / (1.0 + curv)
        y, _, _, it_in, alpha, inner_status = _minimize_bound(
            al_val_grad, y, sp.lower, sp.upper, omega, opts.max_inner, opts, h0=h0
        )
        total_inner += it_in
        if inner_status == "numeric":
            status = "numeric-failure"
            break

        x = sp.x_of(y)
        ceq = problem.eq_residuals(x)
        cin = problem.ineq_residuals(x)
        feas = 0.0
        if ceq.size:
            feas = max(feas, float(np.max(np.abs(ceq))))
        if cin.size:
            feas = max(feas, float(np.max(np.maximum(-cin, 0.0))))
        lam_new = np.clip(
            lam - rho * ceq, -opts.multiplier_max, opts.multiplier_max
        )
        mu_new = np.clip(np.maximum(0.0, mu - rho * cin), 0.0, opts.multiplier_max)
        kkt = kkt_residual(problem, x, {"eq": lam_new, "ineq": mu_new})
        cost = problem.objective(x)
        history.append(
            {
                "outer": outer,
                "cost": cost,
                "feasibility": feas,
                "penalty": rho,
                "kkt": kkt,
                "inner_iterations": it_in,
                "step": alpha,
            }
        )
        if opts.log_sink is not None:
            opts.log_sink(
                f"{outer}\t{cost:.9e}\t{feas:.3e}\t{rho:.3e}\t{alpha:.3e}"
            )

        lam, mu = lam_new, mu_new
        if kkt <= opts.kkt_tol and feas <= opts.feas_tol:
            status = "converged"
            break

        if constrained and feas > opts.feas_tol:
            if feas > opts.feas_improvement * feas_best:
                rho = min(rho * opts.penalty_growth, opts.penalty_cap)
            if feas >= 0.999 * feas_best:
                stall_count += 1
            else:
                stall_count = 0
            if rho >= opts.penalty_cap and stall_count >= 3:
                status = "infeasible-stationary"
                break
        feas_best = min(feas_best, feas)
        omega = max(omega * opts.inner_tol_shrink, 0.3 * opts.kkt_tol)

    return SolveResult(
        status=status,
        x=sp.x_of(y),
        multipliers={"eq": lam, "ineq": mu},
        kkt_residual=float(kkt),
        feasibility=float(feas),
        cost=float(cost),
        history=history,
        iterations=total_inner,
        n_outer=n_outer,
    )
