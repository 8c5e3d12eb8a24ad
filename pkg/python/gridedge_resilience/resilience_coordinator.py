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
Adaptive cyber and physical resource optimisation after a cyberattack.

The upper level picks a replacement for the compromised cyber node and
reroutes the communication tree; the lower level re-dispatches the grid with
the attacked generator out and the backup storage at the compromised bus
enabled. The two levels are solved one after the other.
"""

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .acopf import DispatchResult, solve_multiperiod, solve_opf, with_scenario_storage
from .cyber_steiner import (CyberGraph, TopologyProblem, TopologySolution, build_topology_milp,
                            mirror_graph, solve_milp)
from .exceptions import (InfeasibleError, NoCandidatesError, SolverError, SolveStatus,
                         UnrecoverableCyberError, ValidationError)
from .grid_case import CyberCosts, EssUnit, PowerCase, Scenario, validate_pairing
from .policies import MilpPolicy, RunPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Neighborhood:
    compromised: int
    candidates: Tuple[int, ...]

    def __post_init__(self):
        if self.compromised in self.candidates:
            raise ValidationError(f"compromised node {self.compromised} listed as its own replacement")


@dataclass
class CandidateEvaluation:
    """Outcome of rerouting the tree through one replacement candidate."""

    candidate: int
    rerouted_topology: Optional[TopologySolution]
    cyber_cost: float
    replacement: bool
    replacement_cost: float = 0.0
    status: SolveStatus = SolveStatus.OPTIMAL
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.rerouted_topology is not None and self.status.ok


@dataclass
class CostBreakdown:
    f_cyber: float
    f_power: float
    f_res: float
    alphas: Tuple[float, float, float]

    @property
    def weighted(self) -> Tuple[float, float, float]:
        a1, a2, a3 = self.alphas
        return a1 * self.f_cyber, a2 * self.f_power, a3 * self.f_res

    @property
    def total(self) -> float:
        return sum(self.weighted)


@dataclass
class ResilienceReport:
    baseline: DispatchResult
    attacked: DispatchResult
    pre_attack_topology: TopologySolution
    post_attack_topology: TopologySolution
    costs: CostBreakdown
    graph: CyberGraph
    chosen_candidate: Optional[int] = None
    replacement: bool = False
    candidates: List[CandidateEvaluation] = field(default_factory=list)
    unmitigated: Optional[DispatchResult] = None
    active_ess: Tuple[int, ...] = ()
    voltage_traces: Dict[str, List[float]] = field(default_factory=dict)
    trace_bus: Optional[int] = None


def resilience_cost(replacement: bool, p_ess_profile: Sequence[float], ess: Optional[EssUnit],
                    replacement_cost: float = 0.0) -> float:
    """Replacement plus storage start-up and degradation cost, gated by the replacement flag."""
    if not replacement:
        return 0.0
    cost = replacement_cost
    if ess is not None:
        p = np.asarray(p_ess_profile, dtype=float)
        cost += ess.startup_cost + ess.degradation_weight * float(np.sum(p * p))
    return float(cost)


def derive_neighborhood(graph: CyberGraph, compromised: int,
                        override: Optional[Sequence[int]] = None) -> Neighborhood:
    """Candidate replacements: link neighbours of ``compromised`` unless ``override`` lists them."""
    if compromised not in graph.node_cost:
        raise ValidationError(f"compromised node {compromised} not in cyber graph")
    if override is not None:
        candidates = sorted({int(n) for n in override if n != compromised})
    else:
        candidates = graph.neighbors(compromised)
    if not candidates:
        raise NoCandidatesError(compromised)
    return Neighborhood(compromised, tuple(candidates))


def rerouted_problem(problem: TopologyProblem, compromised: int, candidate: int) -> TopologyProblem:
    """Topology problem with ``compromised`` removed and ``candidate`` taking over its role."""
    critical = (set(problem.critical_nodes) - {compromised}) | {candidate}
    root = candidate if problem.root == compromised else problem.root
    return TopologyProblem(problem.graph.without(compromised), frozenset(critical), root)


def evaluate_candidate(problem: TopologyProblem, compromised: int, candidate: int,
                       costs: Optional[CyberCosts] = None, alpha_cyber: float = 1.0,
                       policy: Optional[MilpPolicy] = None) -> CandidateEvaluation:
    """Reroute the tree with ``candidate`` standing in for ``compromised``.

    Infeasibility is reported in the returned evaluation, never raised.
    """
    costs = costs or CyberCosts()
    replacement_cost = costs.replacement_cost(candidate)
    if candidate == compromised or candidate not in problem.graph.node_cost:
        return CandidateEvaluation(candidate, None, float("inf"), False, replacement_cost,
                                   SolveStatus.INFEASIBLE, "candidate not available")
    rerouted = rerouted_problem(problem, compromised, candidate)
    try:
        solution = solve_milp(build_topology_milp(rerouted), policy)
    except InfeasibleError as err:
        logger.info("candidate %d infeasible: %s", candidate, err)
        return CandidateEvaluation(candidate, None, float("inf"), False, replacement_cost,
                                   SolveStatus.INFEASIBLE, str(err))
    if not solution.status.ok:
        return CandidateEvaluation(candidate, None, float("inf"), False, replacement_cost,
                                   solution.status, "topology search hit its node limit")
    cyber_cost = alpha_cyber * (solution.total_cost + replacement_cost)
    logger.info("candidate %d: f_cyber=%.6f replacement=%.6f cyber_cost=%.6f",
                candidate, solution.total_cost, replacement_cost, cyber_cost)
    return CandidateEvaluation(candidate, solution, cyber_cost, True, replacement_cost)


def select_candidate(evaluations: Sequence[CandidateEvaluation]) -> CandidateEvaluation:
    """Cheapest feasible evaluation, smaller node id on ties."""
    feasible = [e for e in evaluations if e.feasible]
    if not feasible:
        raise UnrecoverableCyberError()
    return min(feasible, key=lambda e: (e.cyber_cost, e.candidate))


async def _bounded(semaphore: asyncio.Semaphore, func, *args, **kwargs):
    async with semaphore:
        return await asyncio.to_thread(func, *args, **kwargs)


async def _solve_periods(case: PowerCase, scenario: Scenario, periods: Sequence[int],
                         disabled: Sequence[frozenset], policy: RunPolicy,
                         semaphore: asyncio.Semaphore) -> DispatchResult:
    """Independent single-period OPFs, gathered in period order."""
    tasks = [_bounded(semaphore, solve_opf, case, scenario.load_scale[t], policy.nlp, t, disabled[t])
             for t in periods]
    results = await asyncio.gather(*tasks)
    combined = results[0]
    for result in results[1:]:
        combined = combined.join(result)
    return combined


def _failed_periods(result: DispatchResult) -> str:
    return result.message or result.status.value


async def run_algorithm1_async(case: PowerCase, scenario: Scenario,
                               policy: Optional[RunPolicy] = None) -> ResilienceReport:
    """Full resilience study: baseline, cyber rerouting and post-attack re-dispatch."""
    policy = policy or RunPolicy()
    validate_pairing(case, scenario)
    work_case = with_scenario_storage(case, scenario)
    semaphore = asyncio.Semaphore(max(1, policy.max_workers))
    horizon = scenario.horizon
    no_outage = [frozenset()] * horizon

    graph = mirror_graph(work_case, scenario)
    topology_problem = TopologyProblem(graph, scenario.critical_nodes, scenario.root_node)
    pre_topology = await _bounded(semaphore, solve_milp, build_topology_milp(topology_problem), policy.milp)
    if not pre_topology.status.ok:
        raise SolverError("initial topology search hit its node limit", pre_topology.status)
    logger.info("initial topology: cost=%.6f links=%s", pre_topology.total_cost, list(pre_topology.active_links))

    baseline = await _solve_periods(work_case, scenario, range(horizon), no_outage, policy, semaphore)
    if not baseline.status.ok:
        raise SolverError(f"baseline dispatch failed: {_failed_periods(baseline)}", baseline.status)

    alphas = scenario.alphas
    attack = scenario.attack
    if attack is None:
        logger.info("no attack configured; reporting baseline only")
        return ResilienceReport(
            baseline=baseline,
            attacked=baseline,
            pre_attack_topology=pre_topology,
            post_attack_topology=pre_topology,
            costs=CostBreakdown(pre_topology.total_cost, baseline.generation_cost, 0.0, alphas),
            graph=graph,
        )

    compromised = attack.compromised_cyber_node
    neighborhood = derive_neighborhood(graph, compromised, scenario.neighbors)
    logger.info("isolating node %d; candidates %s", compromised, list(neighborhood.candidates))
    evaluations = await asyncio.gather(*[
        _bounded(semaphore, evaluate_candidate, topology_problem, compromised, m,
                 scenario.cyber_costs, scenario.alpha_cyber, policy.milp)
        for m in neighborhood.candidates])
    evaluations = sorted(evaluations, key=lambda e: e.candidate)
    chosen = select_candidate(evaluations)
    logger.info("selected replacement node %d (cyber_cost=%.6f)", chosen.candidate, chosen.cyber_cost)

    start = attack.attack_period
    outage = frozenset(work_case.generators_at(attack.disabled_generator_bus))
    disabled = [outage if t >= start else frozenset() for t in range(horizon)]
    active_ess = tuple(work_case.ess_at(compromised)) if compromised in work_case.bus_index else ()
    if not active_ess:
        logger.warning("no backup storage at bus %d; re-dispatching without storage", compromised)

    post = await _bounded(semaphore, solve_multiperiod, work_case, scenario, frozenset(active_ess),
                          disabled, policy.nlp, start)
    if not post.status.ok:
        raise SolverError(f"post-attack dispatch failed: {_failed_periods(post)}", post.status)
    attacked = baseline.window(0, start).join(post)

    unmitigated = None
    if policy.solve_unmitigated:
        unmitigated = await _solve_periods(work_case, scenario, range(horizon), disabled, policy, semaphore)
        if not unmitigated.status.ok:
            logger.warning("unmitigated run did not converge: %s", _failed_periods(unmitigated))

    f_res = chosen.replacement_cost if chosen.replacement else 0.0
    for u in active_ess:
        profile = [d.p_ess[u] for d in post.dispatches]
        f_res += resilience_cost(chosen.replacement, profile, work_case.ess_units[u])
    costs = CostBreakdown(chosen.rerouted_topology.total_cost, attacked.generation_cost, f_res, alphas)

    trace_bus = compromised if compromised in work_case.bus_index else attack.disabled_generator_bus
    traces = {"baseline": baseline.voltage_trace(trace_bus), "mitigated": attacked.voltage_trace(trace_bus)}
    if unmitigated is not None:
        traces["unmitigated"] = unmitigated.voltage_trace(trace_bus)

    logger.info("resilience study done: total=%.6f (cyber %.6f, power %.6f, res %.6f)",
                costs.total, *costs.weighted)
    return ResilienceReport(
        baseline=baseline,
        attacked=attacked,
        pre_attack_topology=pre_topology,
        post_attack_topology=chosen.rerouted_topology,
        costs=costs,
        graph=graph,
        chosen_candidate=chosen.candidate,
        replacement=chosen.replacement,
        candidates=evaluations,
        unmitigated=unmitigated,
        active_ess=active_ess,
        voltage_traces=traces,
        trace_bus=trace_bus,
    )


def run_algorithm1(case: PowerCase, scenario: Scenario, policy: Optional[RunPolicy] = None) -> ResilienceReport:
    """Synchronous entry point around :func:`run_algorithm1_async`."""
    return asyncio.run(run_algorithm1_async(case, scenario, policy))
