# Copyright 2026 The gridedge_resilience Authors
#
# Licensed under the Apache License, Version 2.0 (the "License"); you may not
# use this file except in compliance with the License. You may obtain a copy of
# the License at http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations under
# the License.

"""
Dense primal-dual interior-point solver for smooth constrained problems.

Canonical form::

    min  f(x)
    s.t. c(x)  = 0
         d(x) <= 0
         lo <= x <= hi

Variable bounds are handled by a logarithmic barrier on ``x - lo`` and
``hi - x`` directly, so iterates never leave the box; general inequalities get
slack variables. Fixed variables (``lo == hi``) are removed from the Newton
system. Each iteration factors the symmetric KKT matrix with an LDLᵀ
decomposition after a symmetric equilibration, corrects its inertia by shifting
the Hessian block, and takes a damped step after the fraction-to-boundary rule.
Step lengths are accepted by a filter on the pair (constraint violation,
barrier objective).

Multiplier convention (also used by :func:`check_kkt`)::

    L(x, λ, μ, z_L, z_U) = f(x) - λᵀc(x) + μᵀd(x) - z_Lᵀ(x - lo) + z_Uᵀ(x - hi)

with μ, z_L, z_U ≥ 0.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, SolveStatus, ValidationError
from .policies import NlpPolicy

logger = logging.getLogger(__name__)

Vector = np.ndarray
Matrix = np.ndarray

_S_MAX = 100.0
_BOUND_PUSH = 1e-2
_BOUND_FRAC = 1e-2
_KAPPA_SIGMA = 1e10
_MAX_RESTORATIONS = 5
_DELTA_C = 1e-8
_TINY_STEP = 10.0 * np.finfo(float).eps

# filter line search
_THETA_MAX_FACTOR = 1e4
_THETA_MIN_FACTOR = 1e-4
_GAMMA_THETA = 1e-5
_GAMMA_PHI = 1e-8
_S_THETA = 1.1
_S_PHI = 2.3


def _no_constraints(n: int):
    return (lambda x: np.zeros(0)), (lambda x: np.zeros((0, n)))


@dataclass
class NlpProblem:
    """A smooth NLP in the canonical form above.

    ``hessian(x, obj_factor, lam, mu)`` returns the Hessian of
    ``obj_factor * f - lamᵀc + muᵀd``; when omitted it is approximated by
    central differences of the Lagrangian gradient.
    """

    n_vars: int
    objective: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    initial_point: Vector
    lower: Optional[Vector] = None
    upper: Optional[Vector] = None
    eq_constraints: Optional[Callable[[Vector], Vector]] = None
    eq_jacobian: Optional[Callable[[Vector], Matrix]] = None
    ineq_constraints: Optional[Callable[[Vector], Vector]] = None
    ineq_jacobian: Optional[Callable[[Vector], Matrix]] = None
    hessian: Optional[Callable[[Vector, float, Vector, Vector], Matrix]] = None
    n_eq: int = 0
    n_ineq: int = 0

    def __post_init__(self):
        n = self.n_vars
        self.initial_point = np.asarray(self.initial_point, dtype=float)
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        for name in ("initial_point", "lower", "upper"):
            if getattr(self, name).shape != (n,):
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected ({n},)")
        if np.any(self.lower > self.upper):
            bad = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ValidationError(f"variable {bad}: lower bound {self.lower[bad]} > upper bound {self.upper[bad]}")
        if (self.eq_constraints is None) != (self.eq_jacobian is None):
            raise DimensionError("equality constraints and Jacobian must be given together")
        if (self.ineq_constraints is None) != (self.ineq_jacobian is None):
            raise DimensionError("inequality constraints and Jacobian must be given together")
        if self.eq_constraints is None:
            self.eq_constraints, self.eq_jacobian = _no_constraints(n)
            self.n_eq = 0
        if self.ineq_constraints is None:
            self.ineq_constraints, self.ineq_jacobian = _no_constraints(n)
            self.n_ineq = 0

    def lagrangian_gradient(self, x: Vector, obj_factor: float, lam: Vector, mu: Vector) -> Vector:
        g = obj_factor * np.asarray(self.gradient(x), dtype=float)
        if self.n_eq:
            g = g - self.eq_jacobian(x).T @ lam
        if self.n_ineq:
            g = g + self.ineq_jacobian(x).T @ mu
        return g


@dataclass
class Multipliers:
    eq: Vector
    ineq: Vector
    lower: Optional[Vector] = None
    upper: Optional[Vector] = None


@dataclass
class NlpSolution:
    point: Vector
    objective_value: float
    max_eq_violation: float
    max_ineq_violation: float
    iterations: int
    status: SolveStatus
    multipliers: Optional[Multipliers] = None
    message: str = ""


@dataclass
class KktReport:
    stationarity: float
    primal_feasibility: float
    dual_feasibility: float
    complementarity: float
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = max(self.stationarity, self.primal_feasibility,
                          self.dual_feasibility, self.complementarity) <= self.tol


# ---------------------------------------------------------------------------
# Finite-difference oracles
# ---------------------------------------------------------------------------

def finite_diff_gradient(f: Callable[[Vector], float], point: Vector, h: float = 1e-6) -> Vector:
    """Central-difference gradient with step ``h * (1 + |x_i|)``."""
    x = np.asarray(point, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        grad[i] = (f(xp) - f(xm)) / (2.0 * step)
    return grad


def finite_diff_jacobian(fun: Callable[[Vector], Vector], point: Vector, h: float = 1e-6) -> Matrix:
    """Central-difference Jacobian of a vector function, one column per variable."""
    x = np.asarray(point, dtype=float)
    m = np.asarray(fun(x)).size
    jac = np.empty((m, x.size))
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        jac[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * step)
    return jac


# ---------------------------------------------------------------------------
# KKT check
# ---------------------------------------------------------------------------

def check_kkt(problem: NlpProblem, point: Vector, multipliers: Multipliers, tol: float = 1e-6) -> KktReport:
    """Evaluate the KKT residual blocks of ``problem`` at a primal-dual point."""
    x = np.asarray(point, dtype=float)
    n = problem.n_vars
    if x.shape != (n,):
        raise DimensionError(f"point has shape {x.shape}, expected ({n},)")
    lam = np.asarray(multipliers.eq, dtype=float)
    mu = np.asarray(multipliers.ineq, dtype=float)
    z_lo = np.zeros(n) if multipliers.lower is None else np.asarray(multipliers.lower, dtype=float)
    z_up = np.zeros(n) if multipliers.upper is None else np.asarray(multipliers.upper, dtype=float)
    if lam.shape != (problem.n_eq,):
        raise DimensionError(f"equality multipliers have shape {lam.shape}, expected ({problem.n_eq},)")
    if mu.shape != (problem.n_ineq,):
        raise DimensionError(f"inequality multipliers have shape {mu.shape}, expected ({problem.n_ineq},)")
    if z_lo.shape != (n,) or z_up.shape != (n,):
        raise DimensionError("bound multipliers must have one entry per variable")

    grad_l = problem.lagrangian_gradient(x, 1.0, lam, mu) - z_lo + z_up
    c = np.asarray(problem.eq_constraints(x), dtype=float)
    d = np.asarray(problem.ineq_constraints(x), dtype=float)
    if c.shape != (problem.n_eq,) or d.shape != (problem.n_ineq,):
        raise DimensionError("constraint callbacks disagree with declared counts")

    lo_gap = np.where(np.isfinite(problem.lower), x - problem.lower, 0.0)
    up_gap = np.where(np.isfinite(problem.upper), problem.upper - x, 0.0)
    primal = max(_inf_norm(c), _inf_norm(np.maximum(d, 0.0)),
                 _inf_norm(np.maximum(-lo_gap, 0.0)), _inf_norm(np.maximum(-up_gap, 0.0)))
    dual = max(_inf_norm(np.maximum(-mu, 0.0)), _inf_norm(np.maximum(-z_lo, 0.0)),
               _inf_norm(np.maximum(-z_up, 0.0)))
    comp = max(_inf_norm(mu * d), _inf_norm(z_lo * lo_gap), _inf_norm(z_up * up_gap))
    return KktReport(_inf_norm(grad_l), primal, dual, comp, tol)


def _inf_norm(v: Vector) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


# ---------------------------------------------------------------------------
# Linear algebra helpers
# ---------------------------------------------------------------------------

def _inertia(d: Matrix) -> tuple:
    """(positive, negative, zero) eigenvalue counts of the block-diagonal LDLᵀ factor."""
    n = d.shape[0]
    scale = max(1.0, float(np.max(np.abs(d)))) if n else 1.0
    eps = n * np.finfo(float).eps * scale
    pos = neg = zero = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            eigs = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
            i += 2
        else:
            eigs = (d[i, i],)
            i += 1
        for v in eigs:
            if v > eps:
                pos += 1
            elif v < -eps:
                neg += 1
            else:
                zero += 1
    return pos, neg, zero


def _equilibrate(kkt: Matrix) -> Vector:
    """Symmetric diagonal scaling that brings every row maximum of ``kkt`` to one."""
    row = np.max(np.abs(kkt), axis=1) if kkt.size else np.zeros(0)
    return 1.0 / np.sqrt(np.where(row > 0.0, row, 1.0))


def _fraction_to_boundary(v: Vector, dv: Vector, tau: float) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


# ---------------------------------------------------------------------------
# Interior-point driver
# ---------------------------------------------------------------------------

class _State:
    """Primal-dual iterate and cached evaluations; all vectors are full length."""

    def __init__(self, problem: NlpProblem, lo: Vector, hi: Vector):
        self.problem = problem
        self.lo, self.hi = lo, hi
        self.free = problem.lower < problem.upper
        self.has_lo = self.free & np.isfinite(lo)
        self.has_up = self.free & np.isfinite(hi)

    def evaluate(self, x: Vector):
        p = self.problem
        self.x = x
        self.f = float(p.objective(x))
        self.g = np.asarray(p.gradient(x), dtype=float)
        self.c = np.asarray(p.eq_constraints(x), dtype=float)
        self.jc = np.asarray(p.eq_jacobian(x), dtype=float).reshape(p.n_eq, p.n_vars)
        self.d = np.asarray(p.ineq_constraints(x), dtype=float)
        self.jd = np.asarray(p.ineq_jacobian(x), dtype=float).reshape(p.n_ineq, p.n_vars)
        if self.c.shape != (p.n_eq,) or self.d.shape != (p.n_ineq,):
            raise DimensionError("constraint callbacks disagree with declared counts")

    def lo_gap(self, x: Vector) -> Vector:
        return np.where(self.has_lo, x - self.lo, 1.0)

    def up_gap(self, x: Vector) -> Vector:
        return np.where(self.has_up, self.hi - x, 1.0)


def _relaxed_bounds(problem: NlpProblem, factor: float):
    """Widen the bounds of free variables so touching feasible sets keep an interior."""
    lo, hi = problem.lower.copy(), problem.upper.copy()
    free = lo < hi
    lo[free] -= factor * np.maximum(1.0, np.abs(lo[free]))
    hi[free] += factor * np.maximum(1.0, np.abs(hi[free]))
    return lo, hi


def _push_interior(problem: NlpProblem, lo: Vector, hi: Vector) -> Vector:
    x = problem.initial_point.copy()
    fixed = problem.lower == problem.upper
    x[fixed] = problem.lower[fixed]
    with np.errstate(invalid="ignore"):
        width = np.where(np.isfinite(hi - lo), hi - lo, np.inf)
    push_lo = np.minimum(_BOUND_PUSH * np.maximum(1.0, np.abs(lo)), _BOUND_FRAC * width)
    push_hi = np.minimum(_BOUND_PUSH * np.maximum(1.0, np.abs(hi)), _BOUND_FRAC * width)
    free = ~fixed
    has_lo = free & np.isfinite(lo)
    has_up = free & np.isfinite(hi)
    x[has_lo] = np.maximum(x[has_lo], lo[has_lo] + push_lo[has_lo])
    x[has_up] = np.minimum(x[has_up], hi[has_up] - push_hi[has_up])
    return x


def _hessian(problem: NlpProblem, x: Vector, sigma: float, lam: Vector, mu: Vector) -> Matrix:
    if problem.hessian is not None:
        return np.asarray(problem.hessian(x, sigma, lam, mu), dtype=float)
    jac = finite_diff_jacobian(lambda z: problem.lagrangian_gradient(z, sigma, lam, mu), x)
    return 0.5 * (jac + jac.T)


def solve_nlp(problem: NlpProblem, options: Optional[NlpPolicy] = None) -> NlpSolution:
    """Solve ``problem`` with the primal-dual interior-point method."""
    policy = options or NlpPolicy()
    tol = policy.tol
    n, m, p = problem.n_vars, problem.n_eq, problem.n_ineq

    lo, hi = _relaxed_bounds(problem, policy.bound_relax_factor)
    x = _push_interior(problem, lo, hi)
    g0 = np.asarray(problem.gradient(x), dtype=float)
    gmax = _inf_norm(g0)
    sigma = min(1.0, policy.obj_scale_max_gradient / gmax) if gmax > 0 else 1.0
    state = _State(problem, lo, hi)
    free, has_lo, has_up = state.free, state.has_lo, state.has_up
    fi = np.flatnonzero(free)
    nf = fi.size

    state.evaluate(x)
    s = np.maximum(-state.d, _BOUND_PUSH)
    lam = np.zeros(m)
    mu = np.ones(p)
    z_lo = np.where(has_lo, 1.0, 0.0)
    z_up = np.where(has_up, 1.0, 0.0)
    mu_b = policy.mu_init
    mu_floor = tol / 10.0
    delta_prev = 0.0
    restorations = 0
    status = SolveStatus.ITER_LIMIT
    message = "iteration limit reached"
    it = 0

    theta_init = float(np.abs(state.c).sum() + np.abs(state.d + s).sum())
    theta_max = _THETA_MAX_FACTOR * max(1.0, theta_init)
    theta_min = _THETA_MIN_FACTOR * max(1.0, theta_init)
    filt: List[Tuple[float, float]] = []
    force_mu_decrease = False

    def errors(barrier: float):
        st = state
        grad_l = sigma * st.g - st.jc.T @ lam + st.jd.T @ mu - z_lo + z_up
        n_mult = m + p + int(has_lo.sum()) + int(has_up.sum())
        n_bound = p + int(has_lo.sum()) + int(has_up.sum())
        mult_sum = np.abs(lam).sum() + mu.sum() + z_lo.sum() + z_up.sum()
        s_d = max(_S_MAX, mult_sum / n_mult) / _S_MAX if n_mult else 1.0
        s_c = max(_S_MAX, (mu.sum() + z_lo.sum() + z_up.sum()) / n_bound) / _S_MAX if n_bound else 1.0
        stat = _inf_norm(grad_l[free]) / s_d
        prim = max(_inf_norm(st.c), _inf_norm(st.d + s))
        comp = max(_inf_norm(s * mu - barrier),
                   _inf_norm((st.lo_gap(st.x) * z_lo - barrier)[has_lo]),
                   _inf_norm((st.up_gap(st.x) * z_up - barrier)[has_up])) / s_c
        return max(stat, prim, comp), prim

    def barrier_objective(xv: Vector, sv: Vector, fv: float, barrier: float) -> float:
        val = sigma * fv - barrier * np.log(sv).sum()
        val -= barrier * np.log(state.lo_gap(xv)[has_lo]).sum()
        val -= barrier * np.log(state.up_gap(xv)[has_up]).sum()
        return float(val)

    while it < policy.max_iters:
        err0, _ = errors(0.0)
        orig_inf = max(_inf_norm(state.c), _inf_norm(np.maximum(state.d, 0.0)))
        if err0 <= tol and orig_inf <= tol:
            status, message = SolveStatus.CONVERGED, "converged"
            break
        if nf == 0:
            status, message = SolveStatus.INFEASIBLE, "all variables fixed at an infeasible point"
            break
        mu_prev = mu_b
        while mu_b > mu_floor and (force_mu_decrease or errors(mu_b)[0] <= policy.kappa_eps * mu_b):
            mu_b = max(mu_b / 10.0, mu_floor)
            force_mu_decrease = False
        if mu_b != mu_prev:
            filt = []
            logger.debug("iter %d: barrier parameter reduced to %.3e", it, mu_b)
        force_mu_decrease = False

        it += 1
        lo_gap = state.lo_gap(x)
        up_gap = state.up_gap(x)
        sig_lo = np.where(has_lo, z_lo / lo_gap, 0.0)
        sig_up = np.where(has_up, z_up / up_gap, 0.0)
        sig_s = mu / s

        hess = _hessian(problem, x, sigma, lam, mu)
        jc_f = state.jc[:, fi]
        jd_f = state.jd[:, fi]
        w = hess[np.ix_(fi, fi)] + np.diag((sig_lo + sig_up)[fi]) + jd_f.T @ (sig_s[:, None] * jd_f)

        r_p = state.d + s
        r_c = mu_b - s * mu
        rhs_x = -(sigma * state.g - state.jc.T @ lam + state.jd.T @ mu)
        rhs_x = rhs_x + np.where(has_lo, mu_b / lo_gap, 0.0) - np.where(has_up, mu_b / up_gap, 0.0)
        rhs_x = rhs_x[fi] - jd_f.T @ ((r_c + mu * r_p) / s)
        rhs = np.concatenate([rhs_x, state.c])

        step = _solve_kkt(w, jc_f, rhs, policy, delta_prev, mu_b)
        if step is None:
            status, message = SolveStatus.ITER_LIMIT, "KKT matrix could not be regularised"
            logger.debug("iter %d: inertia correction exhausted at err=%.3e inf_pr=%.3e", it, err0, orig_inf)
            break
        sol, delta = step
        if delta > 0.0:
            delta_prev = delta
        dx = np.zeros(n)
        dx[fi] = sol[:nf]
        dlam = sol[nf:]
        ds = -r_p - state.jd @ dx
        dmu = (r_c - mu * ds) / s
        dz_lo = np.where(has_lo, mu_b / lo_gap - z_lo - sig_lo * dx, 0.0)
        dz_up = np.where(has_up, mu_b / up_gap - z_up + sig_up * dx, 0.0)

        tau = max(policy.tau_min, 1.0 - mu_b)
        alpha_p = min(_fraction_to_boundary(s, ds, tau),
                      _fraction_to_boundary(lo_gap[has_lo], dx[has_lo], tau),
                      _fraction_to_boundary(up_gap[has_up], -dx[has_up], tau))
        alpha_d = min(_fraction_to_boundary(mu, dmu, tau),
                      _fraction_to_boundary(z_lo[has_lo], dz_lo[has_lo], tau),
                      _fraction_to_boundary(z_up[has_up], dz_up[has_up], tau))

        theta = float(np.abs(state.c).sum() + np.abs(r_p).sum())
        phi = barrier_objective(x, s, state.f, mu_b)
        grad_bar_x = sigma * state.g - np.where(has_lo, mu_b / lo_gap, 0.0) + np.where(has_up, mu_b / up_gap, 0.0)
        slope = float(grad_bar_x @ dx - mu_b * np.sum(ds / s))

        # vanishing Newton step: move on to the next barrier problem
        if np.max(np.abs(dx) / (1.0 + np.abs(x)), initial=0.0) <= _TINY_STEP and theta <= tol:
            force_mu_decrease = mu_b > mu_floor

        alpha = alpha_p
        accepted = False
        armijo_step = False
        for _ in range(policy.max_backtracks):
            x_t = x + alpha * dx
            s_t = s + alpha * ds
            f_t = float(problem.objective(x_t))
            c_t = np.asarray(problem.eq_constraints(x_t), dtype=float)
            d_t = np.asarray(problem.ineq_constraints(x_t), dtype=float)
            theta_t = float(np.abs(c_t).sum() + np.abs(d_t + s_t).sum())
            phi_t = barrier_objective(x_t, s_t, f_t, mu_b) if np.isfinite(f_t) else np.inf
            if np.isfinite(phi_t) and np.isfinite(theta_t) and theta_t <= theta_max \
                    and not _filter_blocks(filt, theta_t, phi_t):
                switching = slope < 0.0 and alpha * (-slope) ** _S_PHI > theta ** _S_THETA
                if theta <= theta_min and switching:
                    armijo_step = True
                    accepted = phi_t <= phi + policy.armijo * alpha * slope
                else:
                    armijo_step = False
                    accepted = theta_t <= (1.0 - _GAMMA_THETA) * theta or phi_t <= phi - _GAMMA_PHI * theta
                if accepted:
                    break
            alpha *= 0.5

        if accepted and not armijo_step:
            filt.append(((1.0 - _GAMMA_THETA) * theta, phi - _GAMMA_PHI * theta))

        if not accepted:
            if theta <= max(tol, 1e-8) * max(1, m + p):
                alpha = alpha_p
                logger.debug("iter %d: filter line search failed near feasibility, taking full step", it)
            else:
                restorations += 1
                logger.debug("iter %d: line search failed (theta=%.3e), entering restoration", it, theta)
                x_r = _restore(problem, state, x, policy)
                if x_r is None or restorations > _MAX_RESTORATIONS:
                    status, message = SolveStatus.INFEASIBLE, "restoration failed to reduce infeasibility"
                    break
                filt.append((theta, phi))
                x = x_r
                state.evaluate(x)
                s = np.maximum(-state.d, mu_b)
                mu = np.minimum(mu_b / s, 1e3)
                continue

        x = x + alpha * dx
        s = np.maximum(s + alpha * ds, 1e-300)
        lam = lam + alpha * dlam
        mu = mu + alpha_d * dmu
        z_lo = z_lo + alpha_d * dz_lo
        z_up = z_up + alpha_d * dz_up
        state.evaluate(x)

        # keep the dual iterates within a bounded distance of the central path
        mu = np.clip(mu, mu_b / (_KAPPA_SIGMA * s), _KAPPA_SIGMA * mu_b / s)
        lg, ug = state.lo_gap(x), state.up_gap(x)
        z_lo = np.where(has_lo, np.clip(z_lo, mu_b / (_KAPPA_SIGMA * lg), _KAPPA_SIGMA * mu_b / lg), 0.0)
        z_up = np.where(has_up, np.clip(z_up, mu_b / (_KAPPA_SIGMA * ug), _KAPPA_SIGMA * mu_b / ug), 0.0)

        logger.debug("iter %3d: f=%.8e inf_pr=%.2e mu=%.1e alpha_p=%.2e alpha_d=%.2e delta=%.1e filter=%d",
                     it, state.f, max(_inf_norm(state.c), _inf_norm(np.maximum(state.d, 0.0))),
                     mu_b, alpha, alpha_d, delta, len(filt))

    return _finish(problem, state, lam, mu, z_lo, z_up, sigma, it, status, message, tol)


def _filter_blocks(filt: List[Tuple[float, float]], theta: float, phi: float) -> bool:
    return any(theta >= theta_f and phi >= phi_f for theta_f, phi_f in filt)


def _solve_kkt(w: Matrix, jc: Matrix, rhs: Vector, policy: NlpPolicy, delta_prev: float, mu_b: float):
    """Factor and solve the KKT system with inertia correction.

    The matrix is equilibrated symmetrically before the LDLᵀ factorization,
    which leaves its inertia unchanged. Returns (solution, delta used) or None
    once ``delta`` passes ``policy.delta_max``.
    """
    nf, m = w.shape[0], jc.shape[0]
    base = np.zeros((nf + m, nf + m))
    base[:nf, :nf] = w
    base[:nf, nf:] = -jc.T
    base[nf:, :nf] = -jc
    scale = _equilibrate(base)
    diag_x = np.arange(nf)
    diag_c = np.arange(nf, nf + m)
    delta = 0.0
    delta_c = 0.0
    while True:
        kkt = base.copy()
        kkt[diag_x, diag_x] += delta
        kkt[diag_c, diag_c] = -delta_c
        scaled = scale[:, None] * kkt * scale[None, :]
        _, dblk, _ = scipy.linalg.ldl(scaled, lower=True, hermitian=True)
        pos, neg, zero = _inertia(dblk)
        if pos == nf and neg == m and zero == 0:
            try:
                sol = scale * scipy.linalg.solve(scaled, scale * rhs, assume_a="sym")
            except np.linalg.LinAlgError:
                sol = None
            if sol is not None and np.all(np.isfinite(sol)):
                return sol, delta
            zero = 1
        if zero > 0 and delta_c == 0.0 and m > 0:
            # rank-deficient constraint Jacobian: perturb the equality block first
            delta_c = _DELTA_C * mu_b ** 0.25
            continue
        if delta == 0.0:
            delta = policy.delta_init if delta_prev == 0.0 else max(policy.delta_init, delta_prev / 3.0)
        else:
            delta *= policy.delta_growth
        if delta > policy.delta_max:
            return None


def _restore(problem: NlpProblem, state: _State, x: Vector, policy: NlpPolicy) -> Optional[Vector]:
    """Levenberg-Marquardt descent on the constraint violation, staying inside the box."""
    free = state.free
    fi = np.flatnonzero(free)
    has_lo, has_up = state.has_lo, state.has_up

    def residual(z):
        c = np.asarray(problem.eq_constraints(z), dtype=float)
        d = np.asarray(problem.ineq_constraints(z), dtype=float)
        return np.concatenate([c, np.maximum(d, 0.0)])

    def jacobian(z):
        d = np.asarray(problem.ineq_constraints(z), dtype=float)
        jd = np.asarray(problem.ineq_jacobian(z), dtype=float).reshape(problem.n_ineq, problem.n_vars)
        jd = jd * (d > 0)[:, None]
        jc = np.asarray(problem.eq_jacobian(z), dtype=float).reshape(problem.n_eq, problem.n_vars)
        return np.vstack([jc, jd])[:, fi]

    r = residual(x)
    start = float(r @ r)
    if start == 0.0:
        return x
    damping = 1e-4
    for _ in range(policy.restoration_iters):
        jac = jacobian(x)
        lhs = jac.T @ jac + damping * np.eye(fi.size)
        try:
            step_f = np.linalg.solve(lhs, -jac.T @ r)
        except np.linalg.LinAlgError:
            damping *= 10.0
            continue
        dx = np.zeros_like(x)
        dx[fi] = step_f
        alpha = min(_fraction_to_boundary(state.lo_gap(x)[has_lo], dx[has_lo], 0.99),
                    _fraction_to_boundary(state.up_gap(x)[has_up], -dx[has_up], 0.99))
        x_t = x + alpha * dx
        r_t = residual(x_t)
        if r_t @ r_t < r @ r:
            x, r = x_t, r_t
            damping = max(damping / 10.0, 1e-12)
        else:
            damping *= 10.0
        if r @ r <= 0.81 * start and np.sqrt(r @ r) <= 1e3 * policy.tol:
            break
    if r @ r > 0.81 * start:
        return None
    return x


def _finish(problem, state, lam, mu, z_lo, z_up, sigma, iterations, status, message, tol) -> NlpSolution:
    lo, hi = problem.lower, problem.upper
    x = np.clip(state.x, lo, hi)
    if not np.array_equal(x, state.x):
        state.evaluate(x)
    fixed = ~state.free
    lam_u, mu_u = lam / sigma, mu / sigma
    z_lo_u, z_up_u = z_lo / sigma, z_up / sigma
    if np.any(fixed):
        resid = problem.lagrangian_gradient(x, 1.0, lam_u, mu_u)
        z_lo_u = np.where(fixed, np.maximum(resid, 0.0), z_lo_u)
        z_up_u = np.where(fixed, np.maximum(-resid, 0.0), z_up_u)

    eq_viol = _inf_norm(state.c)
    ineq_viol = _inf_norm(np.maximum(state.d, 0.0))
    if status is SolveStatus.CONVERGED and max(eq_viol, ineq_viol) > tol:
        status, message = SolveStatus.INFEASIBLE, "final point violates constraints"

    logger.info("nlp %s after %d iterations: f=%.10g eq_viol=%.2e ineq_viol=%.2e",
                status.value, iterations, state.f, eq_viol, ineq_viol)
    return NlpSolution(
        point=x,
        objective_value=state.f,
        max_eq_violation=eq_viol,
        max_ineq_violation=ineq_viol,
        iterations=iterations,
        status=status,
        multipliers=Multipliers(lam_u, mu_u, z_lo_u, z_up_u),
        message=message,
    )
