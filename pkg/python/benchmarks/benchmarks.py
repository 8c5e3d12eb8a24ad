#!/usr/bin/env python
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


import pyperf

from gridedge_resilience import (
    RunPolicy, TopologyProblem, assemble_opf, build_topology_milp, data_path, load_case, load_scenario,
    mirror_graph, solve_milp, solve_multiperiod, solve_opf, with_scenario_storage,
)

case14 = load_case(data_path("case14.m"))
attack = load_scenario(data_path("ieee14_attack.toml"))
work_case = with_scenario_storage(case14, attack)
problem = assemble_opf(case14)
x0 = problem.initial_point
topology = TopologyProblem(mirror_graph(case14, attack), attack.critical_nodes, attack.root_node)
outage = frozenset(work_case.generators_at(attack.attack.disabled_generator_bus))
disabled = [outage if t >= attack.attack.attack_period else frozenset() for t in range(attack.horizon)]

runner = pyperf.Runner()
runner.bench_func('opf_eval', lambda: (problem.gradient(x0), problem.eq_jacobian(x0),
                                       problem.hessian(x0, 1.0, problem.eq_constraints(x0), x0[:0])))
runner.bench_func('opf_case14', solve_opf, case14)
runner.bench_func('topology_case14', lambda: solve_milp(build_topology_milp(topology)))
runner.bench_func('post_attack_dispatch', solve_multiperiod, work_case, attack, frozenset({0}), disabled,
                  RunPolicy().nlp, attack.attack.attack_period)
