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

import logging

import pytest
from gridedge_resilience import (
    Bus, CyberCosts, EssUnit, Generator, Line, PowerCase, load_case, parse_matpower_case, serialize_case,
    stp_path_cost,
)
from gridedge_resilience.exceptions import CaseFormatError, UnknownBusError, ValidationError

from fixtures import TWO_BUS_CASE, TestFixtureCase14, storage_unit, three_bus_case, two_bus_case


def assert_cases_close(a: PowerCase, b: PowerCase, rel=1e-12):
    assert a.base_mva == b.base_mva
    assert a.buses == b.buses
    assert a.voltage_bounds == b.voltage_bounds
    assert a.v0 == b.v0
    assert a.generators == b.generators
    assert a.loads == b.loads
    assert a.ess_units == b.ess_units
    assert len(a.lines) == len(b.lines)
    for la, lb in zip(a.lines, b.lines):
        assert (la.from_bus, la.to_bus) == (lb.from_bus, lb.to_bus)
        assert la.g == pytest.approx(lb.g, rel=rel, abs=1e-12)
        assert la.b == pytest.approx(lb.b, rel=rel, abs=1e-12)


class TestParseMatpower(TestFixtureCase14):
    """Reading MATPOWER case text."""

    def test_two_bus_lossless_line(self):
        """A branch with r=0, x=0.1 becomes g=0, b=-10 per-unit."""
        case = parse_matpower_case(TWO_BUS_CASE)
        assert case.n_bus == 2
        assert case.slack_bus.id == 1
        line = case.lines[0]
        assert line.g == 0.0
        assert line.b == pytest.approx(-10.0)
        assert case.loads[0].p_load == 50.0
        gen = case.generators[0]
        assert gen.q_min is None and gen.q_max is None
        assert gen.cost_c1 == 20.0

    def test_case14_counts(self, case14):
        """The IEEE 14-bus file has 14 buses, 20 branches and 5 generators."""
        assert case14.n_bus == 14
        assert len(case14.lines) == 20
        assert len(case14.generators) == 5
        assert len(case14.loads) == 11
        assert case14.slack_bus.id == 1
        assert case14.voltage_bounds == (0.94, 1.06)
        assert [g.bus for g in case14.generators] == [1, 2, 3, 6, 8]
        assert case14.generators[0].cost_c2 == pytest.approx(0.0430292599)
        assert case14.generators_at(6) == [3]

    def test_conductance_susceptance_conversion(self, case14):
        """Every branch satisfies g = r/(r²+x²) and b = -x/(r²+x²)."""
        for line in case14.lines:
            r, x = line.impedance
            z2 = r * r + x * x
            assert line.g == pytest.approx(r / z2, rel=1e-12, abs=1e-12)
            assert line.b == pytest.approx(-x / z2, rel=1e-12)
        line = Line.from_impedance(1, 2, 0.01938, 0.05917)
        z2 = 0.01938 ** 2 + 0.05917 ** 2
        assert line.g == pytest.approx(0.01938 / z2)
        assert line.b == pytest.approx(-0.05917 / z2)

    def test_shunts_and_taps_warned(self, case14_path, caplog):
        """Shunts, line charging and taps are dropped with a warning."""
        with caplog.at_level(logging.WARNING, logger="gridedge_resilience.grid_case"):
            load_case(case14_path)
        text = caplog.text
        assert "bus 9: shunt" in text
        assert "line charging" in text
        assert "tap ratio 0.978 ignored" in text

    def test_unknown_bus(self):
        """A branch to a missing bus is rejected."""
        text = TWO_BUS_CASE.replace("    1   2   0   0.1", "    1   99  0   0.1")
        with pytest.raises(CaseFormatError) as exc_info:
            parse_matpower_case(text)
        assert "unknown bus 99" in str(exc_info.value)
        assert exc_info.value.line is not None

    def test_duplicate_bus(self):
        """Two bus rows with the same id are rejected."""
        text = TWO_BUS_CASE.replace("    2   1   50", "    1   1   50")
        with pytest.raises(CaseFormatError, match="duplicate bus id 1"):
            parse_matpower_case(text)

    def test_zero_impedance_branch(self):
        """r = x = 0 has no admittance."""
        text = TWO_BUS_CASE.replace("    1   2   0   0.1", "    1   2   0   0")
        with pytest.raises(CaseFormatError, match="zero-impedance"):
            parse_matpower_case(text)

    def test_syntax_error_has_line_number(self):
        """Bad numeric tokens report their line."""
        text = TWO_BUS_CASE.replace("100 1   100 0;", "100 1   abc 0;")
        with pytest.raises(CaseFormatError) as exc_info:
            parse_matpower_case(text)
        assert exc_info.value.line == 9
        assert "line 9" in str(exc_info.value)

    def test_missing_table(self):
        """A case without a gencost table is incomplete."""
        text = TWO_BUS_CASE.split("mpc.gencost")[0]
        with pytest.raises(CaseFormatError, match="missing table mpc.gencost"):
            parse_matpower_case(text)

    def test_unterminated_block(self):
        text = TWO_BUS_CASE.replace("    2   0   0   3   0   20  0;\n];", "    2   0   0   3   0   20  0;")
        with pytest.raises(CaseFormatError, match="unterminated"):
            parse_matpower_case(text)

    def test_storage_block(self):
        """An mpc.ess block adds storage units to the case."""
        text = TWO_BUS_CASE + "mpc.ess = [\n    2  -10  10  1  20  5  3  0.5;\n];\n"
        case = parse_matpower_case(text)
        assert case.ess_units == (EssUnit(2, -10.0, 10.0, 1.0, 20.0, 5.0, 3.0, 0.5),)

    def test_non_integer_ids(self):
        """Bus ids and table codes must be whole numbers; the error carries the line."""
        for old, new, what in [
            ("    2   1   50", "    2.5 1   50", "bus id"),
            ("    1   2   0   0.1", "    1   Inf 0   0.1", "branch to bus"),
            ("    2   0   0   3   0   20  0;", "    Inf 0   0   3   0   20  0;", "gencost model"),
        ]:
            with pytest.raises(CaseFormatError, match=what) as exc_info:
                parse_matpower_case(TWO_BUS_CASE.replace(old, new))
            assert exc_info.value.line is not None

    def test_nan_rejected(self):
        """NaN is not a usable number anywhere in a case."""
        with pytest.raises(CaseFormatError, match="bad numeric token 'NaN'"):
            parse_matpower_case(TWO_BUS_CASE.replace("    2   1   50", "    2   1   NaN"))

    def test_generator_rows_survive_skipped_units(self):
        """An out-of-service generator is dropped but the others keep their mpc.gen row."""
        text = TWO_BUS_CASE.replace(
            "mpc.gen = [\n",
            "mpc.gen = [\n    2   0   0   Inf -Inf    1   100 0   100 0;\n",
        ).replace(
            "mpc.gencost = [\n",
            "mpc.gencost = [\n    2   0   0   3   0   30  0;\n",
        )
        case = parse_matpower_case(text)
        assert len(case.generators) == 1
        assert case.generators[0].bus == 1
        assert case.generators[0].row == 2
        assert case.generators[0].cost_c1 == 20.0

    def test_undecodable_file(self, tmp_path):
        """A binary file is a format error, not a crash."""
        binary = tmp_path / "binary.m"
        binary.write_bytes(b"\xff\xfe\x00mpc")
        with pytest.raises(CaseFormatError, match="not a UTF-8 text file"):
            load_case(binary)

    def test_load_case_names_the_path(self, tmp_path):
        """Format errors from a file carry its path."""
        bad = tmp_path / "bad.m"
        bad.write_text("mpc.baseMVA = 100;\n", encoding="utf-8")
        with pytest.raises(CaseFormatError) as exc_info:
            load_case(bad)
        assert str(bad) in str(exc_info.value)
        with pytest.raises(FileNotFoundError):
            load_case(tmp_path / "missing.m")


class TestSerializeCase(TestFixtureCase14):
    """Writing cases back to MATPOWER text."""

    def test_two_bus_round_trip(self):
        """parse(serialize(case)) reproduces the two-bus case."""
        case = two_bus_case()
        assert_cases_close(parse_matpower_case(serialize_case(case)), case)

    def test_case14_round_trip(self, case14):
        """The 14-bus case survives a round trip."""
        assert_cases_close(parse_matpower_case(serialize_case(case14)), case14)

    def test_round_trip_keeps_storage_and_loads(self):
        """Storage units and non-canonical load lists are written out."""
        case = three_bus_case().with_ess([storage_unit()])
        case = PowerCase(case.base_mva, case.buses, case.lines, case.generators,
                         case.loads + case.loads[:1], case.ess_units)
        text = serialize_case(case)
        assert "mpc.ess" in text and "mpc.load" in text
        assert_cases_close(parse_matpower_case(text), case)

    def test_empty_case_rejected(self):
        """A case without buses never gets built."""
        with pytest.raises(ValidationError, match="no buses"):
            PowerCase(100.0, [], [], [])


class TestDataModel:
    """Invariants of the physical data model."""

    def test_single_slack(self):
        """Exactly one slack bus is required."""
        with pytest.raises(ValidationError, match="exactly one slack"):
            two_bus_case(buses=[Bus(1, True), Bus(2, True)])
        with pytest.raises(ValidationError, match="exactly one slack"):
            two_bus_case(buses=[Bus(1), Bus(2)])

    def test_references_checked(self):
        """Elements must sit on existing buses."""
        with pytest.raises(UnknownBusError) as exc_info:
            two_bus_case(generators=[Generator(7, 0.0, 10.0)])
        assert exc_info.value.bus == 7

    def test_voltage_bounds(self):
        with pytest.raises(ValidationError):
            two_bus_case(voltage_bounds=(1.06, 0.94))
        with pytest.raises(ValidationError):
            two_bus_case(voltage_bounds=(0.0, 1.1))

    def test_generator_limits(self):
        """p_min above p_max and negative quadratic costs are rejected."""
        with pytest.raises(ValidationError):
            Generator(1, 10.0, 5.0)
        with pytest.raises(ValidationError):
            Generator(1, 0.0, 5.0, q_min=3.0, q_max=1.0)
        with pytest.raises(ValidationError):
            Generator(1, 0.0, 5.0, cost_c2=-1.0)

    def test_storage_limits(self):
        """Storage must be able to charge and discharge and start inside its energy range."""
        with pytest.raises(ValidationError):
            storage_unit(p_min=1.0)
        with pytest.raises(ValidationError):
            storage_unit(e_initial=100.0)

    def test_self_loop_line(self):
        with pytest.raises(ValidationError):
            Line(1, 1, 0.0, -10.0)


class TestCyberCosts:
    """Cost tables and STP path costs."""

    def test_defaults_and_overrides(self):
        costs = CyberCosts(default_node_cost=1.0, node_costs={3: 4.0}, default_link_cost=2.0,
                           link_costs={(1, 2): 7.0}, replacement_costs={11: 5.0})
        assert costs.node_cost(3) == 4.0
        assert costs.node_cost(4) == 1.0
        assert costs.link_cost(2, 1) == 7.0
        assert costs.link_cost(2, 3) == 2.0
        assert costs.replacement_cost(11) == 5.0
        assert costs.replacement_cost(12) == 0.0

    def test_stp_path_cost(self):
        """Long-form and legacy 802.1D path costs."""
        assert stp_path_cost(1000) == 20_000.0
        assert stp_path_cost(100_000) == 200.0
        assert stp_path_cost(10, legacy=True) == 100.0
        assert stp_path_cost(100, legacy=True) == 19.0
        assert stp_path_cost(1000, legacy=True) == 4.0
        assert stp_path_cost(10_000, legacy=True) == 2.0
        with pytest.raises(ValueError):
            stp_path_cost(25, legacy=True)
        with pytest.raises(ValueError):
            stp_path_cost(0)
