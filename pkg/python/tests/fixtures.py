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

import pytest
from gridedge_resilience import (
    Bus, CyberCosts, CyberGraph, EssUnit, Generator, Line, Load, PowerCase, Scenario, TopologyProblem,
    load_case, load_scenario,
)

TWO_BUS_CASE = """\
function mpc = two_bus
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1   3   0   0   0   0   1   1   0   0   1   1.06    0.94;
    2   1   50  0   0   0   1   1   0   0   1   1.06    0.94;
];
mpc.gen = [
    1   0   0   Inf -Inf    1   100 1   100 0;
];
mpc.branch = [
    1   2   0   0.1 0   0   0   0   0   0   1   -360    360;
];
mpc.gencost = [
    2   0   0   3   0   20  0;
];
"""


def two_bus_case(**overrides) -> PowerCase:
    """Slack bus 1 with one 0-100 MW generator feeding 50 MW at bus 2 over a lossless line."""
    fields = dict(
        base_mva=100.0,
        buses=[Bus(1, is_slack=True), Bus(2)],
        lines=[Line.from_impedance(1, 2, 0.0, 0.1)],
        generators=[Generator(1, 0.0, 100.0, cost_c2=0.0, cost_c1=20.0)],
        loads=[Load(2, 50.0, 0.0)],
    )
    fields.update(overrides)
    return PowerCase(**fields)


def three_bus_case() -> PowerCase:
    """Lossy triangle with a cheap and an expensive generator."""
    return PowerCase(
        base_mva=100.0,
        buses=[Bus(1, is_slack=True), Bus(2), Bus(3)],
        lines=[Line.from_impedance(1, 2, 0.01, 0.1), Line.from_impedance(2, 3, 0.02, 0.15),
               Line.from_impedance(1, 3, 0.015, 0.12)],
        generators=[Generator(1, 0.0, 200.0, 0.02, 10.0, 0.0, -100.0, 100.0),
                    Generator(3, 0.0, 100.0, 0.05, 25.0, 5.0, -50.0, 50.0)],
        loads=[Load(2, 80.0, 20.0), Load(3, 40.0, 10.0)],
    )


def simple_scenario(horizon: int = 2, **overrides) -> Scenario:
    fields = dict(horizon=horizon, period_hours=1.0, critical_nodes={1, 2}, root_node=1)
    fields.update(overrides)
    return Scenario(**fields)


def storage_unit(bus: int = 3, **overrides) -> EssUnit:
    fields = dict(bus=bus, p_min=-20.0, p_max=20.0, e_min=5.0, e_max=60.0, e_initial=30.0,
                  startup_cost=5.0, degradation_weight=0.01)
    fields.update(overrides)
    return EssUnit(**fields)


def graph_of(edges, node_costs=None, nodes=None) -> CyberGraph:
    """Cyber graph from ``(a, b, cost)`` triples; nodes default to the link endpoints."""
    if nodes is None:
        nodes = sorted({a for a, _, _ in edges} | {b for _, b, _ in edges})
    return CyberGraph(
        nodes=tuple(nodes),
        links=tuple((a, b) for a, b, _ in edges),
        node_cost=dict(node_costs or {}),
        link_cost={(min(a, b), max(a, b)): c for a, b, c in edges},
    )


class TestFixtureSmallCases:
    """Base fixture for tests on small hand-built networks."""

    @pytest.fixture
    def two_bus(self):
        return two_bus_case()

    @pytest.fixture
    def three_bus(self):
        return three_bus_case()

    @pytest.fixture
    def triangle_problem(self):
        """Triangle a-b-c with K={a, c}: direct link 5, detour 2+2 through b of cost 0.5."""
        graph = graph_of([(1, 3, 5.0), (1, 2, 2.0), (2, 3, 2.0)], node_costs={1: 1.0, 2: 0.5, 3: 1.0})
        return TopologyProblem(graph, frozenset({1, 3}), 1)


class TestFixtureCase14:
    """Base fixture for tests on the bundled IEEE 14-bus study."""

    @pytest.fixture
    def case14(self, case14_path):
        return load_case(case14_path)

    @pytest.fixture
    def attack_scenario(self, attack_scenario_path):
        return load_scenario(attack_scenario_path)

    @pytest.fixture
    def baseline_scenario(self, baseline_scenario_path):
        return load_scenario(baseline_scenario_path)

    @pytest.fixture
    def uniform_costs(self):
        return CyberCosts(default_node_cost=1.0, default_link_cost=2.0)
