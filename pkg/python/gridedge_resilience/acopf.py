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
AC optimal power flow: branch physics, generation cost, single-period OPF and
the multi-period dispatch coupled through storage energy.

Electrical quantities inside the optimisation are per-unit on the case base;
everything handed back to callers (``Dispatch``, ``DispatchResult``) is in MW,
MVAr and MWh. Storage power is positive when charging.
"""

import logging
from dataclasses import dataclass, field
from typing import AbstractSet, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DimensionError, SolveStatus, ValidationError
from .grid_case import EssUnit, Line, PowerCase, Scenario
from .nlp_kernel import NlpProblem, solve_nlp
from .policies import NlpPolicy

logger = logging.getLogger(__name__)

# bound checks on the returned point use the barrier-kept variables directly
BOUND_TOL = 1e-8
# storage energy overshoot (pu-hours) that decoding trims back onto the limit
ENERGY_TRIM = 1e-6


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class NetworkState:
    """Bus voltage magnitudes (pu) and angles (rad), ordered like ``bus_ids``."""

    v: np.ndarray
    theta: np.ndarray
    bus_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.v.shape != self.theta.shape or self.v.ndim != 1:
            raise DimensionError(f"v has shape {self.v.shape}, theta has shape {self.theta.shape}")
        if not self.bus_ids:
            self.bus_ids = tuple(range(1, self.v.size + 1))
        self.bus_ids = tuple(self.bus_ids)
        if len(self.bus_ids) != self.v.size:
            raise DimensionError(f"{len(self.bus_ids)} bus ids for {self.v.size} voltages")

    @classmethod
    def flat(cls, case: PowerCase) -> "NetworkState":
        v = np.ones(case.n_bus)
        v[case.slack_index] = case.v0
        return cls(v, np.zeros(case.n_bus), tuple(b.id for b in case.buses))

    def position(self, bus: int) -> int:
        try:
            return self.bus_ids.index(bus)
        except ValueError:
            raise ValidationError(f"bus {bus} not in network state") from None

    def voltage_at(self, bus: int) -> float:
        return float(self.v[self.position(bus)])


@dataclass
class Dispatch:
    """Generator set points in MW/MVAr and storage power in MW (charging positive)."""

    p_gen: np.ndarray
    q_gen: np.ndarray
    p_ess: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.p_gen = np.asarray(self.p_gen, dtype=float)
        self.q_gen = np.asarray(self.q_gen, dtype=float)
        self.p_ess = np.asarray(self.p_ess, dtype=float)
        if self.p_gen.shape != self.q_gen.shape:
            raise DimensionError("p_gen and q_gen lengths differ")
        for name in ("p_gen", "q_gen", "p_ess"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} contains non-finite values")

    @classmethod
    def zeros(cls, case: PowerCase) -> "Dispatch":
        ng, ne = len(case.generators), len(case.ess_units)
        return cls(np.zeros(ng), np.zeros(ng), np.zeros(ne))


@dataclass
class DispatchResult:
    """Solved horizon (or window of it); one entry per modelled period."""

    periods: Tuple[int, ...]
    dispatches: List[Dispatch]
    states: List[NetworkState]
    ess_energy: List[np.ndarray]
    load_scale: Tuple[float, ...]
    disabled_gens: Tuple[frozenset, ...]
    status: SolveStatus
    period_costs: List[float] = field(default_factory=list)
    period_degradation: List[float] = field(default_factory=list)
    iterations: int = 0
    max_mismatch: float = 0.0
    message: str = ""

    @property
    def horizon(self) -> int:
        return len(self.periods)

    @property
    def generation_cost(self) -> float:
        """Generation cost summed over the modelled periods ($)."""
        return float(sum(self.period_costs))

    @property
    def degradation_cost(self) -> float:
        return float(sum(self.period_degradation))

    total_cost = generation_cost

    def voltage_trace(self, bus: int) -> List[float]:
        return [state.voltage_at(bus) for state in self.states]

    def window(self, start: int, stop: int) -> "DispatchResult":
        """Periods ``start <= t < stop``; entries are shared, not copied."""
        keep = [k for k, t in enumerate(self.periods) if start <= t < stop]

        def pick(seq):
            return [seq[k] for k in keep]

        return DispatchResult(
            periods=tuple(pick(self.periods)),
            dispatches=pick(self.dispatches),
            states=pick(self.states),
            ess_energy=pick(self.ess_energy),
            load_scale=tuple(pick(self.load_scale)),
            disabled_gens=tuple(pick(self.disabled_gens)),
            status=self.status,
            period_costs=pick(self.period_costs),
            period_degradation=pick(self.period_degradation),
            iterations=self.iterations,
            max_mismatch=self.max_mismatch,
            message=self.message,
        )

    def join(self, later: "DispatchResult") -> "DispatchResult":
        """Concatenate two consecutive windows; the worse status wins."""
        if self.periods and later.periods and later.periods[0] != self.periods[-1] + 1:
            raise ValidationError("result windows are not consecutive")
        status = self.status if not self.status.ok else later.status
        return DispatchResult(
            periods=self.periods + later.periods,
            dispatches=self.dispatches + later.dispatches,
            states=self.states + later.states,
            ess_energy=self.ess_energy + later.ess_energy,
            load_scale=self.load_scale + later.load_scale,
            disabled_gens=self.disabled_gens + later.disabled_gens,
            status=status,
            period_costs=self.period_costs + later.period_costs,
            period_degradation=self.period_degradation + later.period_degradation,
            iterations=self.iterations + later.iterations,
            max_mismatch=max(self.max_mismatch, later.max_mismatch),
            message="; ".join(m for m in (self.message, later.message) if m),
        )


# ---------------------------------------------------------------------------
# Physics
# ---------------------------------------------------------------------------

def branch_flows(state: NetworkState, line: Line, reverse: bool = False) -> Tuple[float, float]:
    """Active and reactive flow (pu) leaving the sending end of ``line``.

    ``reverse`` evaluates the flow from ``to_bus`` towards ``from_bus``.
    """
    i, j = (line.to_bus, line.from_bus) if reverse else (line.from_bus, line.to_bus)
    vi, vj = state.voltage_at(i), state.voltage_at(j)
    delta = state.theta[state.position(i)] - state.theta[state.position(j)]
    vv = vi * vj
    p = (vi * vi - vv * np.cos(delta)) * line.g - vv * np.sin(delta) * line.b
    q = (vv * np.cos(delta) - vi * vi) * line.b - vv * np.sin(delta) * line.g
    return float(p), float(q)


def nodal_mismatch(state: NetworkState, dispatch: Dispatch, case: PowerCase,
                   load_scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Per-bus active and reactive power mismatch (pu); zero when balanced.

    Evaluated line by line through :func:`branch_flows`, independent of the
    vectorised evaluation used by the optimiser.
    """
    if state.v.size != case.n_bus:
        raise DimensionError(f"state has {state.v.size} buses, case has {case.n_bus}")
    if dispatch.p_gen.size != len(case.generators):
        raise DimensionError(f"dispatch has {dispatch.p_gen.size} generators, case has {len(case.generators)}")
    if dispatch.p_ess.size not in (0, len(case.ess_units)):
        raise DimensionError(f"dispatch has {dispatch.p_ess.size} storage units, case has {len(case.ess_units)}")
    base = case.base_mva
    dp = np.zeros(case.n_bus)
    dq = np.zeros(case.n_bus)
    for line in case.lines:
        for reverse in (False, True):
            sender = line.to_bus if reverse else line.from_bus
            p, q = branch_flows(state, line, reverse)
            dp[case.bus_index[sender]] += p
            dq[case.bus_index[sender]] += q
    for k, gen in enumerate(case.generators):
        dp[case.bus_index[gen.bus]] -= dispatch.p_gen[k] / base
        dq[case.bus_index[gen.bus]] -= dispatch.q_gen[k] / base
    for load in case.loads:
        dp[case.bus_index[load.bus]] += load_scale * load.p_load / base
        dq[case.bus_index[load.bus]] += load_scale * load.q_load / base
    for k, unit in enumerate(case.ess_units[:dispatch.p_ess.size]):
        dp[case.bus_index[unit.bus]] += dispatch.p_ess[k] / base
    return dp, dq


def generation_cost(dispatch: Dispatch, case: PowerCase) -> float:
    """Quadratic generation cost in $/h, powers taken in MW."""
    c2 = np.array([g.cost_c2 for g in case.generators])
    c1 = np.array([g.cost_c1 for g in case.generators])
    c0 = np.array([g.cost_c0 for g in case.generators])
    p = dispatch.p_gen
    return float(np.sum(c2 * p * p + c1 * p + c0))


def degradation_cost(p_ess_mw: Sequence[float], unit: EssUnit) -> float:
    p = np.asarray(p_ess_mw, dtype=float)
    return float(unit.degradation_weight * np.sum(p * p))


def with_scenario_storage(case: PowerCase, scenario: Scenario) -> PowerCase:
    """Case whose storage list is the case's own units followed by the scenario's."""
    return case.with_ess(scenario.ess_units) if scenario.ess_units else case


# ---------------------------------------------------------------------------
# Vectorised network model
# ---------------------------------------------------------------------------

class _Network:
    """Arc arrays for one case; each line contributes two directed arcs."""

    def __init__(self, case: PowerCase):
        idx = case.bus_index
        self.nb = case.n_bus
        self.ng = len(case.generators)
        fb = np.array([idx[line.from_bus] for line in case.lines], dtype=int)
        tb = np.array([idx[line.to_bus] for line in case.lines], dtype=int)
        g = np.array([line.g for line in case.lines])
        b = np.array([line.b for line in case.lines])
        self.src = np.concatenate([fb, tb])
        self.dst = np.concatenate([tb, fb])
        self.g = np.concatenate([g, g])
        self.b = np.concatenate([b, b])
        base = case.base_mva
        self.gen_bus = np.array([idx[gen.bus] for gen in case.generators], dtype=int)
        self.p_load = np.zeros(self.nb)
        self.q_load = np.zeros(self.nb)
        for load in case.loads:
            self.p_load[idx[load.bus]] += load.p_load / base
            self.q_load[idx[load.bus]] += load.q_load / base
        self.gen_incidence = np.zeros((self.nb, self.ng))
        self.gen_incidence[self.gen_bus, np.arange(self.ng)] = 1.0

    def _arc_terms(self, v, theta):
        vi, vj = v[self.src], v[self.dst]
        delta = theta[self.src] - theta[self.dst]
        cos, sin = np.cos(delta), np.sin(delta)
        a = self.g * cos + self.b * sin
        bb = self.b * cos - self.g * sin
        return vi, vj, cos, sin, a, bb

    def injections(self, v, theta):
        vi, vj, _, _, a, bb = self._arc_terms(v, theta)
        p_arc = self.g * vi * vi - vi * vj * a
        q_arc = -self.b * vi * vi + vi * vj * bb
        return (np.bincount(self.src, weights=p_arc, minlength=self.nb),
                np.bincount(self.src, weights=q_arc, minlength=self.nb))

    def jacobian(self, v, theta):
        """d(injection)/d[V, theta] for P and Q, each (nb, 2nb)."""
        nb = self.nb
        vi, vj, cos, sin, a, bb = self._arc_terms(v, theta)
        a_d = -self.g * sin + self.b * cos
        b_d = -self.b * sin - self.g * cos
        jp = np.zeros((nb, 2 * nb))
        jq = np.zeros((nb, 2 * nb))
        rows = self.src
        np.add.at(jp, (rows, self.src), 2 * self.g * vi - vj * a)
        np.add.at(jp, (rows, self.dst), -vi * a)
        np.add.at(jp, (rows, nb + self.src), -vi * vj * a_d)
        np.add.at(jp, (rows, nb + self.dst), vi * vj * a_d)
        np.add.at(jq, (rows, self.src), -2 * self.b * vi + vj * bb)
        np.add.at(jq, (rows, self.dst), vi * bb)
        np.add.at(jq, (rows, nb + self.src), vi * vj * b_d)
        np.add.at(jq, (rows, nb + self.dst), -vi * vj * b_d)
        return jp, jq

    def hessian(self, v, theta, w_p, w_q):
        """Hessian over [V, theta] of ``w_pᵀ P_inj + w_qᵀ Q_inj``."""
        nb = self.nb
        vi, vj, cos, sin, a, bb = self._arc_terms(v, theta)
        a_d = -self.g * sin + self.b * cos
        b_d = -self.b * sin - self.g * cos
        wp, wq = w_p[self.src], w_q[self.src]
        f_vivi = wp * 2 * self.g - wq * 2 * self.b
        f_vivj = -wp * a + wq * bb
        f_vid = -wp * vj * a_d + wq * vj * b_d
        f_vjd = -wp * vi * a_d + wq * vi * b_d
        f_dd = wp * vi * vj * a - wq * vi * vj * bb

        i_v, j_v = self.src, self.dst
        i_t, j_t = nb + self.src, nb + self.dst
        rows = np.concatenate([i_v, i_v, j_v, i_v, i_t, i_v, j_t, j_v, i_t, j_v, j_t, i_t, j_t, i_t, j_t])
        cols = np.concatenate([i_v, j_v, i_v, i_t, i_v, j_t, i_v, i_t, j_v, j_t, j_v, i_t, j_t, j_t, i_t])
        vals = np.concatenate([f_vivi, f_vivj, f_vivj, f_vid, f_vid, -f_vid, -f_vid,
                               f_vjd, f_vjd, -f_vjd, -f_vjd, f_dd, f_dd, -f_dd, -f_dd])
        hess = np.zeros((2 * nb, 2 * nb))
        np.add.at(hess, (rows, cols), vals)
        return hess


class OpfLayout:
    """Variable layout of a window of periods.

    Per period: V (nb), theta (nb), Pg (ng), Qg (ng), Pess (one per active unit).
    Storage energy is an affine function of the Pess variables, not a variable.
    """

    def __init__(self, nb: int, ng: int, n_active: int, n_periods: int):
        self.nb, self.ng, self.na, self.n_periods = nb, ng, n_active, n_periods
        self.block = 2 * nb + 2 * ng + n_active
        self.n_vars = self.block * n_periods

    def _at(self, k: int, start: int, size: int) -> slice:
        base = k * self.block + start
        return slice(base, base + size)

    def v(self, k: int) -> slice:
        return self._at(k, 0, self.nb)

    def theta(self, k: int) -> slice:
        return self._at(k, self.nb, self.nb)

    def vtheta(self, k: int) -> slice:
        return self._at(k, 0, 2 * self.nb)

    def pg(self, k: int) -> slice:
        return self._at(k, 2 * self.nb, self.ng)

    def qg(self, k: int) -> slice:
        return self._at(k, 2 * self.nb + self.ng, self.ng)

    def pess(self, k: int) -> slice:
        return self._at(k, 2 * self.nb + 2 * self.ng, self.na)


@dataclass
class OpfProblem(NlpProblem):
    """NlpProblem that remembers how to decode its variable vector."""

    layout: Optional[OpfLayout] = None
    case: Optional[PowerCase] = None
    periods: Tuple[int, ...] = ()
    load_scales: Tuple[float, ...] = ()
    disabled: Tuple[frozenset, ...] = ()
    active_ess: Tuple[int, ...] = ()
    initial_energy: Tuple[float, ...] = ()
    period_hours: float = 1.0
    degradation_factor: float = 1.0


def _build(case: PowerCase, periods: Sequence[int], load_scales: Sequence[float],
           disabled: Sequence[AbstractSet[int]], active_ess: Sequence[int],
           initial_energy: Sequence[float], period_hours: float,
           power_weight: float, degradation_factor: float) -> OpfProblem:
    net = _Network(case)
    base = case.base_mva
    nb, ng = net.nb, net.ng
    units = [case.ess_units[u] for u in active_ess]
    na = len(units)
    n_periods = len(periods)
    lay = OpfLayout(nb, ng, na, n_periods)
    n = lay.n_vars

    for k, gens in enumerate(disabled):
        for gi in gens:
            if not 0 <= gi < ng:
                raise ValidationError(f"disabled generator index {gi} out of range in period {periods[k]}")

    c2 = np.array([g.cost_c2 for g in case.generators]) * base * base
    c1 = np.array([g.cost_c1 for g in case.generators]) * base
    c0 = np.array([g.cost_c0 for g in case.generators])
    w_deg = np.array([u.degradation_weight for u in units]) * base * base * degradation_factor
    ess_incidence = np.zeros((nb, na))
    for a, unit in enumerate(units):
        ess_incidence[case.bus_index[unit.bus], a] = 1.0

    v_lo, v_hi = case.voltage_bounds
    lower = np.empty(n)
    upper = np.empty(n)
    x0 = np.empty(n)
    slack = case.slack_index
    p_lo_all = np.array([g.p_min for g in case.generators]) / base
    p_hi_all = np.array([g.p_max for g in case.generators]) / base
    q_lo_all = np.array([-np.inf if g.q_min is None else g.q_min for g in case.generators]) / base
    q_hi_all = np.array([np.inf if g.q_max is None else g.q_max for g in case.generators]) / base
    for k in range(n_periods):
        lower[lay.v(k)], upper[lay.v(k)] = v_lo, v_hi
        lower[lay.theta(k)], upper[lay.theta(k)] = -np.inf, np.inf
        off = np.zeros(ng, dtype=bool)
        for gi in disabled[k]:
            off[gi] = True
        lower[lay.pg(k)] = np.where(off, 0.0, p_lo_all)
        upper[lay.pg(k)] = np.where(off, 0.0, p_hi_all)
        lower[lay.qg(k)] = np.where(off, 0.0, q_lo_all)
        upper[lay.qg(k)] = np.where(off, 0.0, q_hi_all)
        lower[lay.pess(k)] = [u.p_min / base for u in units]
        upper[lay.pess(k)] = [u.p_max / base for u in units]
        vs = lay.v(k).start
        ts = lay.theta(k).start
        lower[vs + slack] = upper[vs + slack] = case.v0
        lower[ts + slack] = upper[ts + slack] = 0.0

        x0[lay.v(k)] = 1.0
        x0[vs + slack] = case.v0
        x0[lay.theta(k)] = 0.0
        x0[lay.pg(k)] = 0.5 * (lower[lay.pg(k)] + upper[lay.pg(k)])
        q_lo, q_hi = lower[lay.qg(k)], upper[lay.qg(k)]
        x0[lay.qg(k)] = np.where(np.isfinite(q_lo) & np.isfinite(q_hi), 0.5 * (q_lo + q_hi),
                                 np.clip(0.0, q_lo, q_hi))
        x0[lay.pess(k)] = 0.0

    # energy after period k: e0 + dt * sum_{j<=k} Pess_j, per unit, pu-hours
    e0 = np.array([e / base for e in initial_energy])
    e_min = np.array([u.e_min for u in units]) / base
    e_max = np.array([u.e_max for u in units]) / base
    cumulative = np.zeros((n_periods * na, n))
    for k in range(n_periods):
        for j in range(k + 1):
            for a in range(na):
                cumulative[k * na + a, lay.pess(j).start + a] = period_hours
    e0_rep = np.tile(e0, n_periods)
    e_min_rep = np.tile(e_min, n_periods)
    e_max_rep = np.tile(e_max, n_periods)
    jd = np.vstack([-cumulative, cumulative])

    scales = np.asarray(load_scales, dtype=float)
    n_eq = 2 * nb * n_periods

    def objective(x):
        total = 0.0
        for k in range(n_periods):
            p = x[lay.pg(k)]
            total += power_weight * float(np.sum(c2 * p * p + c1 * p + c0))
            pe = x[lay.pess(k)]
            total += float(np.sum(w_deg * pe * pe))
        return total

    def gradient(x):
        g = np.zeros(n)
        for k in range(n_periods):
            g[lay.pg(k)] = power_weight * (2 * c2 * x[lay.pg(k)] + c1)
            g[lay.pess(k)] = 2 * w_deg * x[lay.pess(k)]
        return g

    def eq_constraints(x):
        out = np.empty(n_eq)
        for k in range(n_periods):
            v, th = x[lay.v(k)], x[lay.theta(k)]
            p_inj, q_inj = net.injections(v, th)
            dp = p_inj - net.gen_incidence @ x[lay.pg(k)] + scales[k] * net.p_load + ess_incidence @ x[lay.pess(k)]
            dq = q_inj - net.gen_incidence @ x[lay.qg(k)] + scales[k] * net.q_load
            out[2 * nb * k:2 * nb * k + nb] = dp
            out[2 * nb * k + nb:2 * nb * (k + 1)] = dq
        return out

    def eq_jacobian(x):
        jac = np.zeros((n_eq, n))
        for k in range(n_periods):
            jp, jq = net.jacobian(x[lay.v(k)], x[lay.theta(k)])
            rp = slice(2 * nb * k, 2 * nb * k + nb)
            rq = slice(2 * nb * k + nb, 2 * nb * (k + 1))
            jac[rp, lay.vtheta(k)] = jp
            jac[rq, lay.vtheta(k)] = jq
            jac[rp, lay.pg(k)] = -net.gen_incidence
            jac[rq, lay.qg(k)] = -net.gen_incidence
            jac[rp, lay.pess(k)] = ess_incidence
        return jac

    def ineq_constraints(x):
        energy = e0_rep + cumulative @ x
        return np.concatenate([e_min_rep - energy, energy - e_max_rep])

    def ineq_jacobian(x):
        return jd

    def hessian(x, obj_factor, lam, mu):
        hess = np.zeros((n, n))
        for k in range(n_periods):
            lam_p = lam[2 * nb * k:2 * nb * k + nb]
            lam_q = lam[2 * nb * k + nb:2 * nb * (k + 1)]
            vt = lay.vtheta(k)
            hess[vt, vt] = net.hessian(x[lay.v(k)], x[lay.theta(k)], -lam_p, -lam_q)
            pg = np.arange(lay.pg(k).start, lay.pg(k).stop)
            hess[pg, pg] = obj_factor * power_weight * 2 * c2
            pe = np.arange(lay.pess(k).start, lay.pess(k).stop)
            hess[pe, pe] = obj_factor * 2 * w_deg
        return hess

    has_energy = na > 0
    return OpfProblem(
        n_vars=n,
        objective=objective,
        gradient=gradient,
        initial_point=x0,
        lower=lower,
        upper=upper,
        eq_constraints=eq_constraints,
        eq_jacobian=eq_jacobian,
        ineq_constraints=ineq_constraints if has_energy else None,
        ineq_jacobian=ineq_jacobian if has_energy else None,
        hessian=hessian,
        n_eq=n_eq,
        n_ineq=2 * n_periods * na if has_energy else 0,
        layout=lay,
        case=case,
        periods=tuple(periods),
        load_scales=tuple(float(s) for s in load_scales),
        disabled=tuple(frozenset(d) for d in disabled),
        active_ess=tuple(active_ess),
        initial_energy=tuple(float(e) for e in initial_energy),
        period_hours=period_hours,
        degradation_factor=degradation_factor,
    )


# ---------------------------------------------------------------------------
# Single period
# ---------------------------------------------------------------------------

def assemble_opf(case: PowerCase, load_scale: float = 1.0) -> OpfProblem:
    """Single-period OPF over (V, theta, Pg, Qg) minimising generation cost."""
    return _build(case, periods=(0,), load_scales=(load_scale,), disabled=(frozenset(),),
                  active_ess=(), initial_energy=(), period_hours=1.0,
                  power_weight=1.0, degradation_factor=1.0)


def solve_opf(case: PowerCase, load_scale: float = 1.0, options: Optional[NlpPolicy] = None,
              period: int = 0, disabled_gens: AbstractSet[int] = frozenset()) -> DispatchResult:
    """Solve one period and re-validate the answer independently."""
    problem = _build(case, periods=(period,), load_scales=(load_scale,), disabled=(frozenset(disabled_gens),),
                     active_ess=(), initial_energy=(), period_hours=1.0,
                     power_weight=1.0, degradation_factor=1.0)
    return _solve_and_decode(problem, options)


# ---------------------------------------------------------------------------
# Multi period
# ---------------------------------------------------------------------------

def assemble_multiperiod(case: PowerCase, scenario: Scenario, active_ess: AbstractSet[int] = frozenset(),
                         disabled_gens: Sequence[AbstractSet[int]] = (), start_period: int = 0,
                         initial_energy: Optional[Sequence[float]] = None) -> OpfProblem:
    """Periods ``start_period .. T-1`` coupled through storage energy.

    ``case`` must already carry the storage units (see
    :func:`with_scenario_storage`); ``active_ess`` indexes ``case.ess_units``
    and ``initial_energy`` (MWh, one per case unit) defaults to each unit's
    ``e_initial``. ``disabled_gens[t]`` is the set of generator indices forced
    to zero in absolute period ``t``.

    Objective: alpha2 * sum_t f_power + alpha3 * sum_units w * sum_t P_ess².
    """
    horizon = scenario.horizon
    if not 0 <= start_period < horizon:
        raise ValidationError(f"start period {start_period} outside [0, {horizon})")
    if disabled_gens and len(disabled_gens) != horizon:
        raise DimensionError(f"{len(disabled_gens)} disabled-generator sets for {horizon} periods")
    for u in active_ess:
        if not 0 <= u < len(case.ess_units):
            raise ValidationError(f"storage index {u} out of range")
    if initial_energy is None:
        initial_energy = [unit.e_initial for unit in case.ess_units]
    if len(initial_energy) != len(case.ess_units):
        raise DimensionError(f"{len(initial_energy)} initial energies for {len(case.ess_units)} storage units")

    periods = tuple(range(start_period, horizon))
    active = tuple(sorted(active_ess))
    disabled = [frozenset(disabled_gens[t]) if disabled_gens else frozenset() for t in periods]
    return _build(case, periods=periods, load_scales=[scenario.load_scale[t] for t in periods],
                  disabled=disabled, active_ess=active,
                  initial_energy=[initial_energy[u] for u in active],
                  period_hours=scenario.period_hours,
                  power_weight=scenario.alpha_power,
                  degradation_factor=scenario.alpha_resilience)


def solve_multiperiod(case: PowerCase, scenario: Scenario, active_ess: AbstractSet[int] = frozenset(),
                      disabled_gens: Sequence[AbstractSet[int]] = (), options: Optional[NlpPolicy] = None,
                      start_period: int = 0, initial_energy: Optional[Sequence[float]] = None) -> DispatchResult:
    problem = assemble_multiperiod(case, scenario, active_ess, disabled_gens, start_period, initial_energy)
    return _solve_and_decode(problem, options)


# ---------------------------------------------------------------------------
# Decoding and re-validation
# ---------------------------------------------------------------------------

def _solve_and_decode(problem: OpfProblem, options: Optional[NlpPolicy]) -> DispatchResult:
    solution = solve_nlp(problem, options)
    result = decode_solution(problem, solution.point, solution.status, solution.iterations, solution.message)
    tol = (options or NlpPolicy()).tol
    issues = validate_dispatch(problem.case, result, tol)
    if issues and result.status.ok:
        logger.warning("solver reported %s but re-validation failed: %s", result.status.value, "; ".join(issues))
        result.status = SolveStatus.INFEASIBLE
        result.message = "; ".join(issues)
    logger.info("dispatch periods %s: status=%s cost=%.6f $/h max_mismatch=%.2e",
                _period_span(result.periods), result.status.value, result.generation_cost, result.max_mismatch)
    return result


def _period_span(periods: Sequence[int]) -> str:
    return f"{periods[0]}..{periods[-1]}" if periods else "-"


def decode_solution(problem: OpfProblem, x: np.ndarray, status: SolveStatus,
                    iterations: int = 0, message: str = "") -> DispatchResult:
    """Convert an optimiser vector into a :class:`DispatchResult` in MW/MVAr/MWh."""
    case, lay = problem.case, problem.layout
    base = case.base_mva
    bus_ids = tuple(b.id for b in case.buses)
    n_units = len(case.ess_units)
    energy = np.array([case.ess_units[u].e_initial for u in range(n_units)], dtype=float)
    for a, u in enumerate(problem.active_ess):
        energy[u] = problem.initial_energy[a]

    dispatches, states, energies = [], [], []
    period_costs, period_degradation = [], []
    for k in range(lay.n_periods):
        p_ess = np.zeros(n_units)
        for a, u in enumerate(problem.active_ess):
            p_ess[u] = _within_energy_limits(case.ess_units[u], energy[u], x[lay.pess(k)][a] * base,
                                             problem.period_hours, ENERGY_TRIM * base)
            energy[u] = energy[u] + p_ess[u] * problem.period_hours
        dispatch = Dispatch(x[lay.pg(k)] * base, x[lay.qg(k)] * base, p_ess)
        dispatches.append(dispatch)
        states.append(NetworkState(x[lay.v(k)].copy(), x[lay.theta(k)].copy(), bus_ids))
        energies.append(energy.copy())
        period_costs.append(generation_cost(dispatch, case))
        period_degradation.append(sum(degradation_cost([p_ess[u]], case.ess_units[u]) for u in problem.active_ess))

    result = DispatchResult(
        periods=problem.periods,
        dispatches=dispatches,
        states=states,
        ess_energy=energies,
        load_scale=problem.load_scales,
        disabled_gens=problem.disabled,
        status=status,
        period_costs=period_costs,
        period_degradation=period_degradation,
        iterations=iterations,
        message=message,
    )
    result.max_mismatch = max_mismatch(case, result)
    return result


def _within_energy_limits(unit: EssUnit, energy: float, p_ess: float, period_hours: float, slack: float) -> float:
    """Storage power trimmed so the energy after the period lands inside [e_min, e_max].

    Only overshoots up to ``slack`` MWh are trimmed; larger ones are left for
    :func:`validate_dispatch` to report.
    """
    after = energy + p_ess * period_hours
    if unit.e_min - slack <= after < unit.e_min:
        p_ess = (unit.e_min - energy) / period_hours
    elif unit.e_max < after <= unit.e_max + slack:
        p_ess = (unit.e_max - energy) / period_hours
    else:
        return p_ess
    return min(max(p_ess, unit.p_min), unit.p_max)


def max_mismatch(case: PowerCase, result: DispatchResult) -> float:
    worst = 0.0
    for k in range(result.horizon):
        dp, dq = nodal_mismatch(result.states[k], result.dispatches[k], case, result.load_scale[k])
        worst = max(worst, float(np.max(np.abs(dp))), float(np.max(np.abs(dq))))
    return worst


def validate_dispatch(case: PowerCase, result: DispatchResult, tol: float = 1e-6) -> List[str]:
    """Independent check of balance, limits and storage energy; returns the problems found."""
    issues: List[str] = []
    v_lo, v_hi = case.voltage_bounds
    base = case.base_mva
    mismatch = max_mismatch(case, result)
    result.max_mismatch = mismatch
    if mismatch > tol:
        issues.append(f"nodal mismatch {mismatch:.3e} pu exceeds {tol:g}")
    for k, (state, dispatch) in enumerate(zip(result.states, result.dispatches)):
        t = result.periods[k]
        if np.any(state.v < v_lo - BOUND_TOL) or np.any(state.v > v_hi + BOUND_TOL):
            issues.append(f"period {t}: voltage outside [{v_lo}, {v_hi}]")
        if abs(state.theta[case.slack_index]) > BOUND_TOL or abs(state.v[case.slack_index] - case.v0) > BOUND_TOL:
            issues.append(f"period {t}: slack bus not at reference")
        for gi, gen in enumerate(case.generators):
            p, q = dispatch.p_gen[gi], dispatch.q_gen[gi]
            if gi in result.disabled_gens[k]:
                if p != 0.0 or q != 0.0:
                    issues.append(f"period {t}: disabled generator {gi} produces power")
                continue
            if p < gen.p_min - BOUND_TOL * base or p > gen.p_max + BOUND_TOL * base:
                issues.append(f"period {t}: generator {gi} P={p:.6g} outside limits")
            if (gen.q_min is not None and q < gen.q_min - BOUND_TOL * base) or \
                    (gen.q_max is not None and q > gen.q_max + BOUND_TOL * base):
                issues.append(f"period {t}: generator {gi} Q={q:.6g} outside limits")
        for u, unit in enumerate(case.ess_units):
            p_ess = dispatch.p_ess[u] if dispatch.p_ess.size else 0.0
            if p_ess < unit.p_min - BOUND_TOL * base or p_ess > unit.p_max + BOUND_TOL * base:
                issues.append(f"period {t}: storage {u} P={p_ess:.6g} outside limits")
            if result.ess_energy:
                e = result.ess_energy[k][u]
                if e < unit.e_min - BOUND_TOL or e > unit.e_max + BOUND_TOL:
                    issues.append(f"period {t}: storage {u} energy {e:.6g} MWh outside limits")
    return issues


def energy_recursion_error(result: DispatchResult, initial_energy: Sequence[float], period_hours: float) -> float:
    """Largest |e_t - e_{t-1} - P_t * dt| over the result (MWh)."""
    prev = np.asarray(initial_energy, dtype=float)
    worst = 0.0
    for dispatch, energy in zip(result.dispatches, result.ess_energy):
        p = dispatch.p_ess if dispatch.p_ess.size else np.zeros_like(prev)
        worst = max(worst, float(np.max(np.abs(energy - prev - p * period_hours), initial=0.0)))
        prev = energy
    return worst
