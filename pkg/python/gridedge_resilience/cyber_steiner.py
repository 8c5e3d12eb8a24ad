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
Minimum-cost cyber topology: a node-weighted Steiner tree written as a
single-commodity flow MILP, solved by a small deterministic branch-and-bound
over LP relaxations.

Variables, in this order: one activation binary ``y`` per candidate link
(sorted link order), one activation binary ``x`` per node (sorted node order),
then a continuous flow ``h`` on each direction of every link. The root
injects one unit for every other active node; each active non-root node
consumes one unit.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from .exceptions import InfeasibleError, OracleSizeError, SolveStatus, SolverError, ValidationError
from .grid_case import LinkKey, PowerCase, Scenario, link_key
from .policies import MilpPolicy

logger = logging.getLogger(__name__)

Arc = Tuple[int, int]

ORACLE_MAX_NODES = 12
FLOW_TOL = 1e-6


# ---------------------------------------------------------------------------
# Graph and problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CyberGraph:
    """Candidate cyber layer: nodes, undirected candidate links and their costs."""

    nodes: Tuple[int, ...]
    links: Tuple[LinkKey, ...]
    node_cost: Mapping[int, float] = field(default_factory=dict)
    link_cost: Mapping[LinkKey, float] = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes))
        if len(set(nodes)) != len(nodes):
            raise ValidationError("duplicate cyber node")
        seen = set()
        links = []
        for a, b in self.links:
            if a == b:
                raise ValidationError(f"self-loop link at node {a}")
            key = link_key(a, b)
            if key in seen:
                raise ValidationError(f"duplicate link {key}")
            for end in key:
                if end not in nodes:
                    raise ValidationError(f"link {key} references unknown node {end}")
            seen.add(key)
            links.append(key)
        node_cost = {n: float(self.node_cost.get(n, 0.0)) for n in nodes}
        link_cost = {}
        for key in links:
            raw = self.link_cost.get(key, self.link_cost.get((key[1], key[0]), 0.0))
            link_cost[key] = float(raw)
        if any(c < 0 for c in node_cost.values()) or any(c < 0 for c in link_cost.values()):
            raise ValidationError("cyber costs must be non-negative")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "links", tuple(sorted(links)))
        object.__setattr__(self, "node_cost", node_cost)
        object.__setattr__(self, "link_cost", link_cost)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.nodes)
        for key in self.links:
            graph.add_edge(*key, weight=self.link_cost[key])
        return graph

    def neighbors(self, node: int) -> List[int]:
        if node not in self.node_cost:
            raise ValidationError(f"node {node} not in cyber graph")
        return sorted(self.to_networkx().neighbors(node))

    def without(self, node: int) -> "CyberGraph":
        """Copy with ``node`` and every link incident to it removed."""
        return CyberGraph(
            nodes=tuple(n for n in self.nodes if n != node),
            links=tuple(k for k in self.links if node not in k),
            node_cost={n: c for n, c in self.node_cost.items() if n != node},
            link_cost={k: c for k, c in self.link_cost.items() if node not in k},
        )


def mirror_graph(case: PowerCase, scenario: Scenario) -> CyberGraph:
    """Map every bus to a cyber node; candidate links mirror the lines unless the scenario lists them."""
    nodes = tuple(b.id for b in case.buses)
    if scenario.candidate_links is not None:
        links = sorted({link_key(a, b) for a, b in scenario.candidate_links})
    else:
        links = sorted({link_key(line.from_bus, line.to_bus) for line in case.lines})
    costs = scenario.cyber_costs
    return CyberGraph(
        nodes=nodes,
        links=tuple(links),
        node_cost={n: costs.node_cost(n) for n in nodes},
        link_cost={k: costs.link_cost(*k) for k in links},
    )


@dataclass(frozen=True)
class TopologyProblem:
    graph: CyberGraph
    critical_nodes: FrozenSet[int]
    root: int

    def __post_init__(self):
        object.__setattr__(self, "critical_nodes", frozenset(self.critical_nodes))
        if self.root not in self.critical_nodes:
            raise ValidationError(f"root {self.root} is not a critical node")
        missing = sorted(set(self.critical_nodes) - set(self.graph.nodes))
        if missing:
            raise ValidationError(f"critical nodes {missing} not in cyber graph")


# ---------------------------------------------------------------------------
# MILP model
# ---------------------------------------------------------------------------

@dataclass
class MilpModel:
    """Dense LP-form model: min cᵀz s.t. A_ub z <= b_ub, A_eq z = b_eq, lo <= z <= hi."""

    problem: TopologyProblem
    links: Tuple[LinkKey, ...]
    nodes: Tuple[int, ...]
    arcs: Tuple[Arc, ...]
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    big_m: float

    @property
    def n_binaries(self) -> int:
        return len(self.links) + len(self.nodes)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def y_index(self, key: LinkKey) -> int:
        return self.links.index(key)

    def x_index(self, node: int) -> int:
        return len(self.links) + self.nodes.index(node)

    def h_index(self, arc: Arc) -> int:
        return self.n_binaries + self.arcs.index(arc)

    @property
    def fixed_nodes(self) -> List[int]:
        return [n for n in self.nodes if self.lower[self.x_index(n)] == 1.0]


def build_topology_milp(problem: TopologyProblem) -> MilpModel:
    graph = problem.graph
    links = graph.links
    nodes = graph.nodes
    arcs: List[Arc] = []
    for a, b in links:
        arcs.extend([(a, b), (b, a)])
    n_l, n_n, n_a = len(links), len(nodes), len(arcs)
    n = n_l + n_n + n_a
    big_m = float(n_n)
    y0, x0, h0 = 0, n_l, n_l + n_n
    node_pos = {node: k for k, node in enumerate(nodes)}
    root = problem.root

    c = np.zeros(n)
    c[y0:x0] = [graph.link_cost[k] for k in links]
    c[x0:h0] = [graph.node_cost[v] for v in nodes]

    eq_rows: List[np.ndarray] = []
    b_eq: List[float] = []
    # root outflow equals the number of other active nodes
    row = np.zeros(n)
    for k, (a, b) in enumerate(arcs):
        if a == root:
            row[h0 + k] = 1.0
    row[x0:h0] = -1.0
    eq_rows.append(row)
    b_eq.append(-1.0)
    # every other node keeps one unit when active
    for node in nodes:
        if node == root:
            continue
        row = np.zeros(n)
        for k, (a, b) in enumerate(arcs):
            if b == node:
                row[h0 + k] += 1.0
            if a == node:
                row[h0 + k] -= 1.0
        row[x0 + node_pos[node]] = -1.0
        eq_rows.append(row)
        b_eq.append(0.0)
    # a tree has one link fewer than active nodes
    row = np.zeros(n)
    row[y0:x0] = 1.0
    row[x0:h0] = -1.0
    eq_rows.append(row)
    b_eq.append(-1.0)

    ub_rows: List[np.ndarray] = []
    for k in range(n_a):
        row = np.zeros(n)
        row[h0 + k] = 1.0
        row[y0 + k // 2] = -big_m
        ub_rows.append(row)
    for li, (a, b) in enumerate(links):
        for end in (a, b):
            row = np.zeros(n)
            row[y0 + li] = 1.0
            row[x0 + node_pos[end]] = -1.0
            ub_rows.append(row)
        # an active tree link always carries flow
        row = np.zeros(n)
        row[y0 + li] = 1.0
        row[h0 + 2 * li] = -1.0
        row[h0 + 2 * li + 1] = -1.0
        ub_rows.append(row)

    lower = np.zeros(n)
    upper = np.ones(n)
    upper[h0:] = big_m
    for k, (a, b) in enumerate(arcs):
        if b == root:
            upper[h0 + k] = 0.0
    for node in problem.critical_nodes:
        lower[x0 + node_pos[node]] = 1.0

    model = MilpModel(
        problem=problem,
        links=links,
        nodes=nodes,
        arcs=tuple(arcs),
        c=c,
        a_ub=np.array(ub_rows).reshape(len(ub_rows), n),
        b_ub=np.zeros(len(ub_rows)),
        a_eq=np.array(eq_rows),
        b_eq=np.array(b_eq),
        lower=lower,
        upper=upper,
        big_m=big_m,
    )
    logger.debug("topology MILP: %d links, %d nodes, %d arcs, %d eq rows, %d ub rows",
                 n_l, n_n, n_a, model.a_eq.shape[0], model.a_ub.shape[0])
    return model


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass
class TopologySolution:
    active_nodes: FrozenSet[int]
    active_links: Tuple[LinkKey, ...]
    flows: Dict[Arc, float]
    total_cost: float
    status: SolveStatus
    root: Optional[int] = None
    nodes_explored: int = 0

    def edge_rows(self, graph: CyberGraph) -> List[Tuple[int, int, float]]:
        """(a, b, link cost) per active link, in sorted order."""
        return [(a, b, graph.link_cost[(a, b)]) for a, b in self.active_links]


def _tree_solution(problem: TopologyProblem, active_nodes: Iterable[int], active_links: Iterable[LinkKey],
                   status: SolveStatus, explored: int = 0) -> TopologySolution:
    """Exact costs and flows for a tree: each arc carries the size of the subtree behind it."""
    graph = problem.graph
    nodes = frozenset(active_nodes)
    links = tuple(sorted(link_key(a, b) for a, b in active_links))
    flows: Dict[Arc, float] = {}
    for a, b in graph.links:
        flows[(a, b)] = 0.0
        flows[(b, a)] = 0.0
    tree = nx.Graph()
    tree.add_nodes_from(nodes)
    tree.add_edges_from(links)
    if problem.root in tree and nx.is_tree(tree):
        bfs = nx.bfs_tree(tree, problem.root)
        for parent, child in bfs.edges():
            flows[(parent, child)] = float(len(nx.descendants(bfs, child)) + 1)
    cost = sum(graph.node_cost[v] for v in sorted(nodes)) + sum(graph.link_cost[k] for k in links)
    return TopologySolution(nodes, links, flows, float(cost), status, problem.root, explored)


class _BranchAndBound:
    """Depth-first branch-and-bound over the binaries, fixed index order, 1-branch first."""

    def __init__(self, model: MilpModel, policy: MilpPolicy):
        self.model = model
        self.policy = policy
        self.explored = 0

    def _relax(self, lower: np.ndarray, upper: np.ndarray):
        m = self.model
        has_ub = m.a_ub.shape[0] > 0
        res = linprog(m.c, A_ub=m.a_ub if has_ub else None, b_ub=m.b_ub if has_ub else None,
                      A_eq=m.a_eq, b_eq=m.b_eq,
                      bounds=np.column_stack([lower, upper]), method="highs")
        if res.status == 2:
            return None
        if res.status != 0:
            # any other status leaves this node without a valid bound
            status = SolveStatus.ITER_LIMIT if res.status == 1 else SolveStatus.INFEASIBLE
            raise SolverError(f"LP relaxation failed (linprog status {res.status}): {res.message}", status)
        return float(res.fun), res.x

    def _first_fractional(self, z: np.ndarray) -> Optional[int]:
        tol = self.policy.int_tol
        for k in range(self.model.n_binaries):
            if min(z[k], 1.0 - z[k]) > tol:
                return k
        return None

    def search(self, lower: np.ndarray, upper: np.ndarray, cutoff: float = np.inf,
               first_within: bool = False) -> Tuple[Optional[float], Optional[np.ndarray], bool]:
        """Best integral point with cost below ``cutoff``.

        With ``first_within`` the search stops at the first integral point whose
        cost does not exceed ``cutoff``. Returns (cost, binaries, hit_limit).
        """
        tol = self.policy.cost_tol
        best_cost: Optional[float] = None
        best_z: Optional[np.ndarray] = None
        incumbent = cutoff
        stack = [(lower.copy(), upper.copy())]
        while stack:
            if self.explored >= self.policy.max_iters:
                return best_cost, best_z, True
            lo, hi = stack.pop()
            self.explored += 1
            relaxed = self._relax(lo, hi)
            if relaxed is None:
                continue
            bound, z = relaxed
            if first_within:
                if bound > incumbent + tol:
                    continue
            elif bound >= incumbent - tol:
                continue
            k = self._first_fractional(z)
            if k is None:
                binaries = np.round(z[:self.model.n_binaries])
                best_cost, best_z, incumbent = bound, binaries, bound
                if first_within:
                    return best_cost, best_z, False
                continue
            lo0, hi0 = lo.copy(), hi.copy()
            hi0[k] = 0.0
            lo1, hi1 = lo.copy(), hi.copy()
            lo1[k] = 1.0
            stack.append((lo0, hi0))
            stack.append((lo1, hi1))
        return best_cost, best_z, False


def _decode(model: MilpModel, binaries: np.ndarray) -> Tuple[FrozenSet[int], Tuple[LinkKey, ...]]:
    n_l = len(model.links)
    links = tuple(k for i, k in enumerate(model.links) if binaries[i] > 0.5)
    nodes = frozenset(v for j, v in enumerate(model.nodes) if binaries[n_l + j] > 0.5)
    return nodes, links


def _check_connectable(problem: TopologyProblem) -> None:
    graph = problem.graph.to_networkx()
    component = nx.node_connected_component(graph, problem.root)
    stranded = sorted(set(problem.critical_nodes) - component)
    if stranded:
        raise InfeasibleError(f"critical nodes {stranded} cannot reach root {problem.root}")


def solve_milp(model: MilpModel, policy: Optional[MilpPolicy] = None) -> TopologySolution:
    """Exact optimum of the topology MILP.

    Among equal-cost optima the lexicographically smallest sorted tuple of
    active links is returned.
    """
    policy = policy or MilpPolicy()
    problem = model.problem
    _check_connectable(problem)
    bnb = _BranchAndBound(model, policy)
    cost, z, hit_limit = bnb.search(model.lower, model.upper)
    if z is None:
        if hit_limit:
            return TopologySolution(frozenset(), (), {}, float("inf"), SolveStatus.ITER_LIMIT,
                                    problem.root, bnb.explored)
        raise InfeasibleError("critical nodes cannot be connected by candidate links")
    if hit_limit:
        nodes, links = _decode(model, z)
        logger.warning("topology search stopped after %d nodes; returning incumbent", bnb.explored)
        return _tree_solution(problem, nodes, links, SolveStatus.ITER_LIMIT, bnb.explored)

    nodes, links = _lexicographic_refine(model, bnb, cost, z)
    solution = _tree_solution(problem, nodes, links, SolveStatus.OPTIMAL, bnb.explored)
    logger.info("topology optimal: cost=%.6f nodes=%s links=%d (explored %d)",
                solution.total_cost, sorted(solution.active_nodes), len(solution.active_links), bnb.explored)
    return solution


def _lexicographic_refine(model: MilpModel, bnb: _BranchAndBound, optimum: float, z: np.ndarray):
    """Walk links in sorted order keeping the smallest optimal active-link tuple."""
    n_l = len(model.links)
    known = [z]
    lower, upper = model.lower.copy(), model.upper.copy()
    chosen: List[int] = []

    def compatible(binaries, lo, hi):
        return bool(np.all(binaries >= lo[:model.n_binaries] - 0.5) and np.all(binaries <= hi[:model.n_binaries] + 0.5))

    def optimal_exists(lo, hi):
        for cand in known:
            if compatible(cand, lo, hi):
                return True
        cost, found, _ = bnb.search(lo, hi, cutoff=optimum, first_within=True)
        if found is not None:
            known.append(found)
            return True
        return False

    for li in range(n_l):
        # stop once the chosen links alone can form an optimum
        lo_stop, hi_stop = lower.copy(), upper.copy()
        hi_stop[li:n_l] = 0.0
        if optimal_exists(lo_stop, hi_stop):
            lower, upper = lo_stop, hi_stop
            break
        lo_try, hi_try = lower.copy(), upper.copy()
        lo_try[li] = 1.0
        if optimal_exists(lo_try, hi_try):
            lower = lo_try
            chosen.append(li)
        else:
            upper[li] = 0.0

    for cand in reversed(known):
        if compatible(cand, lower, upper):
            return _decode(model, cand)
    return _decode(model, z)


# ---------------------------------------------------------------------------
# Oracle and verification
# ---------------------------------------------------------------------------

def enumerate_oracle(problem: TopologyProblem) -> TopologySolution:
    """Exhaustive optimum: every optional-node subset, minimum spanning tree of each."""
    graph = problem.graph
    if len(graph.nodes) > ORACLE_MAX_NODES:
        raise OracleSizeError(f"oracle limited to {ORACLE_MAX_NODES} nodes, graph has {len(graph.nodes)}")
    full = graph.to_networkx()
    required = sorted(problem.critical_nodes)
    optional = [v for v in graph.nodes if v not in problem.critical_nodes]
    best: Optional[Tuple[float, Tuple[LinkKey, ...], FrozenSet[int]]] = None
    for size in range(len(optional) + 1):
        for extra in itertools.combinations(optional, size):
            members = required + list(extra)
            sub = full.subgraph(members)
            if not nx.is_connected(sub):
                continue
            mst = nx.minimum_spanning_tree(sub, weight="weight", algorithm="kruskal")
            links = tuple(sorted(link_key(a, b) for a, b in mst.edges()))
            cost = sum(graph.node_cost[v] for v in members) + sum(graph.link_cost[k] for k in links)
            if best is None or cost < best[0] - 1e-12 or (abs(cost - best[0]) <= 1e-12 and links < best[1]):
                best = (cost, links, frozenset(members))
    if best is None:
        raise InfeasibleError("critical nodes cannot be connected by candidate links")
    return _tree_solution(problem, best[2], best[1], SolveStatus.OPTIMAL)


@dataclass
class TreeReport:
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.passed


def verify_tree(solution: TopologySolution, problem: TopologyProblem) -> TreeReport:
    """Independent structural and flow checks of a topology solution."""
    report = TreeReport()
    graph = problem.graph
    nodes = set(solution.active_nodes)
    links = [link_key(a, b) for a, b in solution.active_links]
    big_m = float(len(graph.nodes))

    if len(links) != len(nodes) - 1:
        report.failures.append(f"link count {len(links)} != active nodes - 1 ({len(nodes) - 1})")
    candidates = set(graph.links)
    for key in links:
        if key not in candidates:
            report.failures.append(f"link {key} is not a candidate link")
        if key[0] not in nodes or key[1] not in nodes:
            report.failures.append(f"endpoint inactive on link {key}")
    missing = sorted(set(problem.critical_nodes) - nodes)
    if missing:
        report.failures.append(f"critical nodes {missing} inactive")

    tree = nx.Graph()
    tree.add_nodes_from(nodes)
    tree.add_edges_from(links)
    if tree.number_of_nodes() and not nx.is_connected(tree):
        report.failures.append("connectivity violated")
    if tree.number_of_nodes() and not nx.is_forest(tree):
        report.failures.append("acyclic violated")

    flows = solution.flows
    active_set = set(links)
    for (a, b), value in flows.items():
        if value < -FLOW_TOL:
            report.failures.append(f"negative flow on arc {(a, b)}")
        if value > FLOW_TOL and link_key(a, b) not in active_set:
            report.failures.append(f"flow on inactive link {link_key(a, b)}")
        if value > big_m + FLOW_TOL:
            report.failures.append(f"flow on arc {(a, b)} exceeds M")
        if b == problem.root and value > FLOW_TOL:
            report.failures.append(f"flow into root on arc {(a, b)}")
    root_out = sum(v for (a, _), v in flows.items() if a == problem.root)
    if abs(root_out - (len(nodes) - 1)) > FLOW_TOL:
        report.failures.append(f"flow conservation violated at root: outflow {root_out}")
    for node in graph.nodes:
        if node == problem.root:
            continue
        inflow = sum(v for (_, b), v in flows.items() if b == node)
        outflow = sum(v for (a, _), v in flows.items() if a == node)
        expected = 1.0 if node in nodes else 0.0
        if abs(inflow - outflow - expected) > FLOW_TOL:
            report.failures.append(f"flow conservation violated at node {node}")
    if report.failures:
        logger.debug("tree verification failed: %s", "; ".join(report.failures))
    return report
