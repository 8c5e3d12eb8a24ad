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

# Flat public API; exceptions live in gridedge_resilience.exceptions
from .acopf import (BOUND_TOL, Dispatch, DispatchResult, NetworkState, OpfLayout, OpfProblem, assemble_multiperiod,
                    assemble_opf, branch_flows, decode_solution, degradation_cost, energy_recursion_error,
                    generation_cost, max_mismatch, nodal_mismatch, solve_multiperiod, solve_opf, validate_dispatch,
                    with_scenario_storage)
from .cyber_steiner import (ORACLE_MAX_NODES, CyberGraph, MilpModel, TopologyProblem, TopologySolution, TreeReport,
                            build_topology_milp, enumerate_oracle, mirror_graph, solve_milp, verify_tree)
from .exceptions import SolveStatus
from .grid_case import (AttackSpec, Bus, CyberCosts, EssUnit, Generator, Line, Load, PowerCase, Scenario,
                        data_path, link_key, load_case, load_scenario, parse_matpower_case, parse_scenario,
                        serialize_case, stp_path_cost, validate_pairing)
from .nlp_kernel import (KktReport, Multipliers, NlpProblem, NlpSolution, check_kkt, finite_diff_gradient,
                         finite_diff_jacobian, solve_nlp)
from .policies import BasePolicy, MilpPolicy, NlpPolicy, RunPolicy
from .resilience_coordinator import (CandidateEvaluation, CostBreakdown, Neighborhood, ResilienceReport,
                                     derive_neighborhood, evaluate_candidate, rerouted_problem, resilience_cost,
                                     run_algorithm1, run_algorithm1_async, select_candidate)
from .scenario_cli import ResultBundle, RunConfig, cmd_run, cmd_topology, cmd_validate

try:
    from importlib.metadata import version as _pkg_version
    __version__ = _pkg_version("gridedge_resilience")
except Exception:
    __version__ = "0.0.0-dev"
