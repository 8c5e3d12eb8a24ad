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

from gridedge_resilience import (
    CyberGraph, TopologyProblem, build_topology_milp, data_path, derive_neighborhood, enumerate_oracle,
    evaluate_candidate, load_case, load_scenario, mirror_graph, select_candidate, solve_milp, verify_tree,
)


def small_graph():
    """Five-node ring with a cheap relay in the middle."""
    return CyberGraph(
        nodes=(1, 2, 3, 4, 5),
        links=((1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (1, 3), (3, 5)),
        node_cost={1: 1.0, 2: 1.0, 3: 0.2, 4: 1.0, 5: 1.0},
        link_cost={(1, 2): 4.0, (2, 3): 1.0, (3, 4): 1.0, (4, 5): 4.0, (1, 5): 6.0, (1, 3): 1.5, (3, 5): 1.0},
    )


def main():
    problem = TopologyProblem(small_graph(), frozenset({1, 2, 4, 5}), root=1)
    solution = solve_milp(build_topology_milp(problem))
    oracle = enumerate_oracle(problem)
    print(f"branch-and-bound: cost={solution.total_cost:.2f} links={list(solution.active_links)} "
          f"({solution.nodes_explored} LP nodes)")
    print(f"enumeration:      cost={oracle.total_cost:.2f} links={list(oracle.active_links)}")
    print("tree check:", "ok" if verify_tree(solution, problem) else verify_tree(solution, problem).failures)

    case = load_case(data_path("case14.m"))
    scenario = load_scenario(data_path("ieee14_attack.toml"))
    graph = mirror_graph(case, scenario)
    problem = TopologyProblem(graph, scenario.critical_nodes, scenario.root_node)
    tree = solve_milp(build_topology_milp(problem))
    print(f"\n14-bus initial tree: cost={tree.total_cost:.1f} nodes={sorted(tree.active_nodes)}")
    for a, b, cost in tree.edge_rows(graph):
        print(f"  {a:2d} - {b:2d}  cost {cost:g}")

    compromised = scenario.attack.compromised_cyber_node
    hood = derive_neighborhood(graph, compromised, scenario.neighbors)
    evaluations = [evaluate_candidate(problem, compromised, m, scenario.cyber_costs, scenario.alpha_cyber)
                   for m in hood.candidates]
    for e in evaluations:
        print(f"  candidate {e.candidate}: cyber cost {e.cyber_cost:.1f} ({e.status.value})")
    print(f"replacement for node {compromised}: {select_candidate(evaluations).candidate}")


if __name__ == "__main__":
    main()
