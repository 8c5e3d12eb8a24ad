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
    AttackSpec, EssUnit, load_case, load_scenario, parse_scenario, stp_path_cost, validate_pairing,
)
from gridedge_resilience.exceptions import ScenarioError

from fixtures import TestFixtureCase14

MINIMAL = """\
[horizon]
periods = 3
period_hours = 1.5

[cyber]
critical_nodes = [1, 2]
root = 1
"""


class TestParseScenario(TestFixtureCase14):
    """Reading TOML scenario files."""

    def test_attack_scenario(self, attack_scenario):
        """The bundled 14-bus study: T=12, 2 h periods, K={1,2,3,6,8}, attack on node 6 at period 6."""
        s = attack_scenario
        assert s.horizon == 12
        assert s.period_hours == 2.0
        assert s.critical_nodes == frozenset({1, 2, 3, 6, 8})
        assert s.root_node == 1
        assert s.attack == AttackSpec(6, 6, 6)
        assert s.neighbors == (11, 12, 13)
        assert s.alphas == (1.0, 1.0, 1.0)
        assert len(s.load_scale) == 12
        assert s.ess_units == (EssUnit(6, -20.0, 20.0, 10.0, 100.0, 60.0, 50.0, 0.05),)
        costs = s.cyber_costs
        assert costs.replacement_cost(11) < costs.replacement_cost(13) < costs.replacement_cost(12)

    def test_defaults(self):
        """Omitted alphas default to 1, load scale to 1.0, attack to none."""
        s = parse_scenario(MINIMAL)
        assert s.alphas == (1.0, 1.0, 1.0)
        assert s.load_scale == (1.0, 1.0, 1.0)
        assert s.attack is None
        assert s.candidate_links is None
        assert s.neighbors is None
        assert s.ess_units == ()

    def test_root_outside_critical_set(self):
        """root must be one of the critical nodes."""
        text = MINIMAL.replace("root = 1", "root = 7")
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(text)
        assert exc_info.value.key == "cyber.root"

    def test_attack_period_range(self):
        """The attack period must fall inside the horizon."""
        text = MINIMAL + "\n[attack]\nperiod = 3\ncompromised_node = 2\ngenerator_bus = 2\n"
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(text)
        assert exc_info.value.key == "attack.period"

    def test_missing_required_key(self):
        text = MINIMAL.replace("period_hours = 1.5\n", "")
        with pytest.raises(ScenarioError, match="missing required key horizon.period_hours"):
            parse_scenario(text)

    def test_missing_section(self):
        with pytest.raises(ScenarioError, match=r"missing required section \[cyber\]"):
            parse_scenario(MINIMAL.split("[cyber]")[0])

    def test_unknown_key(self):
        """Unknown keys are errors, not silently ignored."""
        text = MINIMAL.replace("root = 1", "root = 1\nrooot = 2")
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(text)
        assert exc_info.value.key == "cyber.rooot"

    def test_non_positive_alpha(self):
        """Balancing coefficients must be positive."""
        with pytest.raises(ScenarioError):
            parse_scenario(MINIMAL + "\n[alphas]\nalpha2 = 0.0\n")

    def test_load_scale_length(self):
        text = MINIMAL.replace("period_hours = 1.5", "period_hours = 1.5\nload_scale = [1.0, 0.9]")
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(text)
        assert exc_info.value.key == "horizon.load_scale"

    def test_syntax_error(self):
        with pytest.raises(ScenarioError, match="syntax"):
            parse_scenario("[horizon\nperiods = 2\n")

    def test_link_bandwidths(self):
        """Bandwidths turn into STP path costs that take precedence over explicit link costs."""
        text = MINIMAL + ("\n[costs]\nlink_costs = [[1, 2, 9.0], [2, 3, 4.0]]\n"
                          "link_bandwidths = [[2, 1, 100]]\nstp_legacy = true\n")
        s = parse_scenario(text)
        assert s.cyber_costs.link_cost(1, 2) == stp_path_cost(100, legacy=True) == 19.0
        assert s.cyber_costs.link_cost(3, 2) == 4.0

    def test_negative_costs(self):
        with pytest.raises(ScenarioError):
            parse_scenario(MINIMAL + "\n[costs]\nnode_costs = { \"2\" = -1.0 }\n")

    def test_storage_invariants(self):
        """Storage tables go through the same validation as the data model."""
        text = MINIMAL + ("\n[[ess]]\nbus = 2\np_min = -1.0\np_max = 1.0\ne_min = 0.0\n"
                          "e_max = 5.0\ne_initial = 9.0\n")
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(text)
        assert exc_info.value.key == "ess"

    def test_wrongly_typed_values(self):
        """Values of the wrong TOML type are scenario errors that name their key."""
        cases = [
            ("periods = 3", 'periods = "3"', "horizon.periods"),
            ("periods = 3", "periods = 3.5", "horizon.periods"),
            ("period_hours = 1.5", "period_hours = [1.5]", "horizon.period_hours"),
            ("period_hours = 1.5", "period_hours = nan", "horizon.period_hours"),
            ("root = 1", "root = true", "cyber.root"),
            ("critical_nodes = [1, 2]", 'critical_nodes = [1, "two"]', "cyber.critical_nodes"),
            ("critical_nodes = [1, 2]", "critical_nodes = 1", "cyber.critical_nodes"),
        ]
        for old, new, key in cases:
            with pytest.raises(ScenarioError) as exc_info:
                parse_scenario(MINIMAL.replace(old, new))
            assert exc_info.value.key == key, new

    def test_wrongly_typed_sections(self):
        """Typed checks also cover costs, attack, alphas and storage tables."""
        cases = [
            ("\n[costs]\ndefault_link_cost = \"cheap\"\n", "costs.default_link_cost"),
            ("\n[costs]\nnode_costs = { \"2\" = \"x\" }\n", "costs.node_costs"),
            ("\n[costs]\nnode_costs = { \"two\" = 1.0 }\n", "costs.node_costs"),
            ("\n[costs]\nlink_costs = [[1, 2]]\n", "costs.link_costs"),
            ("\n[costs]\nstp_legacy = 1\n", "costs.stp_legacy"),
            ("\n[attack]\nperiod = \"1\"\ncompromised_node = 2\ngenerator_bus = 2\n", "attack.period"),
            ("\n[alphas]\nalpha1 = \"one\"\n", "alphas.alpha1"),
            ("\n[[ess]]\nbus = 2\np_min = \"-1\"\np_max = 1.0\ne_min = 0.0\ne_max = 5.0\ne_initial = 1.0\n",
             "ess.p_min"),
            ("\n[[ess]]\nbus = 2.0\np_min = -1.0\np_max = 1.0\ne_min = 0.0\ne_max = 5.0\ne_initial = 1.0\n",
             "ess.bus"),
        ]
        for extra, key in cases:
            with pytest.raises(ScenarioError) as exc_info:
                parse_scenario(MINIMAL + extra)
            assert exc_info.value.key == key, extra

    def test_integers_accepted_as_numbers(self):
        """Whole numbers are fine where a float is expected."""
        s = parse_scenario(MINIMAL.replace("period_hours = 1.5", "period_hours = 2"))
        assert s.period_hours == 2.0
        assert isinstance(s.period_hours, float)

    def test_wecc_scenario(self, wecc_scenario_path):
        """The alternative WECC 9-bus study uses K={1,2,3,6} and legacy STP costs."""
        s = load_scenario(wecc_scenario_path)
        assert s.critical_nodes == frozenset({1, 2, 3, 6})
        assert s.cyber_costs.link_cost(1, 4) == 4.0
        assert s.cyber_costs.link_cost(4, 5) == 19.0
        assert s.attack == AttackSpec(4, 3, 3)


class TestValidatePairing(TestFixtureCase14):
    """Cross-checks between a scenario and its case."""

    def test_bundled_pairs(self, case14, attack_scenario, baseline_scenario, case9_path, wecc_scenario_path):
        validate_pairing(case14, attack_scenario)
        validate_pairing(case14, baseline_scenario)
        validate_pairing(load_case(case9_path), load_scenario(wecc_scenario_path))

    def test_critical_node_without_bus(self, case14):
        s = parse_scenario(MINIMAL.replace("[1, 2]", "[1, 99]"))
        with pytest.raises(ScenarioError) as exc_info:
            validate_pairing(case14, s)
        assert exc_info.value.key == "cyber.critical_nodes"

    def test_attack_on_bus_without_generator(self, case14):
        """The attacked generator bus must host a generator."""
        s = parse_scenario(MINIMAL + "\n[attack]\nperiod = 1\ncompromised_node = 2\ngenerator_bus = 4\n")
        with pytest.raises(ScenarioError) as exc_info:
            validate_pairing(case14, s)
        assert exc_info.value.key == "attack.generator_bus"
