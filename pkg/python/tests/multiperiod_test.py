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

import numpy as np
import pytest
from gridedge_resilience import (
    assemble_multiperiod, decode_solution, energy_recursion_error, finite_diff_jacobian, solve_multiperiod, solve_opf,
    validate_dispatch, with_scenario_storage,
)
from gridedge_resilience.exceptions import DimensionError, SolveStatus, ValidationError

from fixtures import TestFixtureCase14, TestFixtureSmallCases, simple_scenario, storage_unit


class TestMultiperiodDispatch(TestFixtureSmallCases):
    """Horizon-coupled dispatch on the three-bus network."""

    def test_separable_without_storage(self, three_bus):
        """With no storage a two-period horizon is two independent single-period OPFs."""
        result = solve_multiperiod(three_bus, simple_scenario(horizon=2))
        single = solve_opf(three_bus)
        assert result.status is SolveStatus.CONVERGED
        assert result.generation_cost == pytest.approx(2.0 * single.generation_cost, rel=1e-6)
        for dispatch in result.dispatches:
            np.testing.assert_allclose(dispatch.p_gen, single.dispatches[0].p_gen, atol=1e-2)

    def test_storage_discharges_when_generation_is_dear(self, three_bus):
        """Stored energy displaces generation and stays inside its limits."""
        case = three_bus.with_ess([storage_unit()])
        scenario = simple_scenario(horizon=2)
        result = solve_multiperiod(case, scenario, active_ess={0})
        assert result.status is SolveStatus.CONVERGED
        p_ess = [d.p_ess[0] for d in result.dispatches]
        assert min(p_ess) < -1.0
        unit = case.ess_units[0]
        for energy in result.ess_energy:
            assert unit.e_min - 1e-6 <= energy[0] <= unit.e_max + 1e-6
        assert validate_dispatch(case, result) == []
        assert result.degradation_cost > 0.0

    def test_energy_recursion(self, three_bus):
        """e_t = e_(t-1) + P_t * dt holds to 1e-10 MWh."""
        case = three_bus.with_ess([storage_unit()])
        scenario = simple_scenario(horizon=3, period_hours=0.5)
        result = solve_multiperiod(case, scenario, active_ess={0})
        assert result.status is SolveStatus.CONVERGED
        assert energy_recursion_error(result, [30.0], scenario.period_hours) <= 1e-10

    def test_empty_storage_cannot_discharge(self, three_bus):
        """Starting at e_min with no charging headroom pins storage power to zero."""
        case = three_bus.with_ess([storage_unit(p_max=0.0, e_initial=5.0)])
        result = solve_multiperiod(case, simple_scenario(horizon=2), active_ess={0})
        assert result.status is SolveStatus.CONVERGED
        for dispatch in result.dispatches:
            assert abs(dispatch.p_ess[0]) <= 1e-4

    def test_energy_overshoot_trimmed_on_decode(self, three_bus):
        """Storage power that dips the energy below e_min by solver noise is trimmed onto the floor."""
        case = three_bus.with_ess([storage_unit(e_initial=5.0)])
        problem = assemble_multiperiod(case, simple_scenario(horizon=2), active_ess={0})
        x = problem.initial_point.copy()
        x[problem.layout.pess(0)] = -1e-9
        x[problem.layout.pess(1)] = 0.0
        result = decode_solution(problem, x, SolveStatus.CONVERGED)
        assert result.dispatches[0].p_ess[0] == 0.0
        for energy in result.ess_energy:
            assert energy[0] >= case.ess_units[0].e_min
        assert energy_recursion_error(result, [5.0], 1.0) <= 1e-10

    def test_energy_limits_checked_to_1e8(self, three_bus):
        """validate_dispatch reports storage energy 1e-7 MWh outside its limits."""
        case = three_bus.with_ess([storage_unit(e_initial=5.0)])
        problem = assemble_multiperiod(case, simple_scenario(horizon=2), active_ess={0})
        x = problem.initial_point.copy()
        x[problem.layout.pess(0)] = 0.0
        x[problem.layout.pess(1)] = 0.0
        result = decode_solution(problem, x, SolveStatus.CONVERGED)
        result.ess_energy[1][0] = 5.0 - 1e-9
        assert not any("energy" in issue for issue in validate_dispatch(case, result))
        result.ess_energy[1][0] = 5.0 - 1e-7
        assert any("storage 0 energy" in issue for issue in validate_dispatch(case, result))

    def test_inactive_storage_stays_idle(self, three_bus):
        """Units outside ``active_ess`` report zero power and keep their initial energy."""
        case = three_bus.with_ess([storage_unit()])
        result = solve_multiperiod(case, simple_scenario(horizon=2))
        for dispatch, energy in zip(result.dispatches, result.ess_energy):
            assert dispatch.p_ess[0] == 0.0
            assert energy[0] == 30.0

    def test_disabled_generator_per_period(self, three_bus):
        """A generator disabled in one period is exactly zero there and free elsewhere."""
        scenario = simple_scenario(horizon=2, load_scale=(1.0, 0.7))
        result = solve_multiperiod(three_bus, scenario, disabled_gens=[frozenset(), {0}])
        assert result.status is SolveStatus.CONVERGED
        assert result.dispatches[1].p_gen[0] == 0.0
        assert result.dispatches[1].q_gen[0] == 0.0
        assert result.dispatches[0].p_gen[0] > 50.0
        assert result.dispatches[1].p_gen[1] > 84.0

    def test_start_period_and_initial_energy(self, three_bus):
        """A window from period 1 carries absolute period numbers and the given starting energy."""
        case = three_bus.with_ess([storage_unit()])
        scenario = simple_scenario(horizon=3, load_scale=(1.0, 0.9, 1.1))
        result = solve_multiperiod(case, scenario, active_ess={0}, start_period=1, initial_energy=[50.0])
        assert result.periods == (1, 2)
        assert result.load_scale == (0.9, 1.1)
        assert energy_recursion_error(result, [50.0], 1.0) <= 1e-10

    def test_argument_checks(self, three_bus):
        case = three_bus.with_ess([storage_unit()])
        scenario = simple_scenario(horizon=2)
        with pytest.raises(ValidationError):
            assemble_multiperiod(case, scenario, start_period=2)
        with pytest.raises(DimensionError):
            assemble_multiperiod(case, scenario, disabled_gens=[frozenset()])
        with pytest.raises(ValidationError):
            assemble_multiperiod(case, scenario, active_ess={3})
        with pytest.raises(DimensionError):
            assemble_multiperiod(case, scenario, initial_energy=[1.0, 2.0])
        with pytest.raises(ValidationError):
            assemble_multiperiod(case, scenario, disabled_gens=[frozenset(), {5}])

    def test_energy_rows_match_finite_differences(self, three_bus):
        """The storage energy constraints are affine with the assembled Jacobian."""
        case = three_bus.with_ess([storage_unit()])
        problem = assemble_multiperiod(case, simple_scenario(horizon=3), active_ess={0})
        assert problem.n_ineq == 6
        rng = np.random.default_rng(17)
        x = problem.initial_point + rng.normal(scale=0.05, size=problem.n_vars)
        np.testing.assert_allclose(problem.ineq_jacobian(x),
                                   finite_diff_jacobian(problem.ineq_constraints, x), atol=1e-7)


class TestDispatchWindows(TestFixtureSmallCases):
    """Slicing and concatenating dispatch results."""

    def test_window_then_join(self, three_bus):
        result = solve_multiperiod(three_bus, simple_scenario(horizon=3))
        head, tail = result.window(0, 1), result.window(1, 3)
        assert head.periods == (0,) and tail.periods == (1, 2)
        joined = head.join(tail)
        assert joined.periods == result.periods
        assert joined.generation_cost == pytest.approx(result.generation_cost)

    def test_join_requires_consecutive_windows(self, three_bus):
        result = solve_multiperiod(three_bus, simple_scenario(horizon=3))
        with pytest.raises(ValidationError, match="consecutive"):
            result.window(0, 1).join(result.window(2, 3))

    def test_worse_status_wins(self, three_bus):
        """Joining a failed window marks the whole result as failed."""
        result = solve_multiperiod(three_bus, simple_scenario(horizon=2))
        tail = result.window(1, 2)
        tail.status = SolveStatus.ITER_LIMIT
        assert result.window(0, 1).join(tail).status is SolveStatus.ITER_LIMIT


class TestCase14Outage(TestFixtureCase14):
    """Post-attack re-dispatch of the bundled 14-bus study."""

    @pytest.mark.slow
    def test_storage_covers_lost_generator(self, case14, attack_scenario):
        """With the bus-6 unit out from period 6, storage at bus 6 discharges and voltages hold."""
        case = with_scenario_storage(case14, attack_scenario)
        horizon = attack_scenario.horizon
        outage = frozenset(case.generators_at(6))
        disabled = [outage if t >= 6 else frozenset() for t in range(horizon)]
        result = solve_multiperiod(case, attack_scenario, active_ess={0}, disabled_gens=disabled, start_period=6)
        assert result.status is SolveStatus.CONVERGED
        assert result.periods == tuple(range(6, horizon))
        assert all(d.p_gen[3] == 0.0 for d in result.dispatches)
        assert any(d.p_ess[0] < -1e-3 for d in result.dispatches)
        v_lo, v_hi = case.voltage_bounds
        for v in result.voltage_trace(6):
            assert v_lo - 1e-8 <= v <= v_hi + 1e-8
        assert energy_recursion_error(result, [60.0], attack_scenario.period_hours) <= 1e-10
        assert validate_dispatch(case, result) == []
