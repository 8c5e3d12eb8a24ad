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
Batch command line front end.

    gridedge-resilience run --case case14.m --scenario ieee14_attack.toml --out results/
    gridedge-resilience validate --case case14.m --scenario ieee14_attack.toml
    gridedge-resilience topology --case case14.m --scenario ieee14_attack.toml --out results/

Exit status is 0 on success, 1 for unreadable or invalid input and 2 when a
solver fails. Diagnostics go to stderr; result files never carry timestamps.
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .acopf import DispatchResult, with_scenario_storage
from .cyber_steiner import CyberGraph, TopologyProblem, TopologySolution, build_topology_milp, \
    mirror_graph, solve_milp, verify_tree
from .exceptions import (CaseFormatError, DimensionError, NoCandidatesError, ScenarioError,
                         SolverError, ValidationError)
from .grid_case import PowerCase, Scenario, load_case, load_scenario, validate_pairing
from .policies import RunPolicy
from .resilience_coordinator import ResilienceReport, rerouted_problem, run_algorithm1

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2

MODES = ("baseline", "attack", "both")

DISPATCH_COLUMNS = ["period", "generator", "p_mw", "q_mvar"]
ESS_COLUMNS = ["period", "bus", "p_mw", "e_mwh"]
VOLTAGE_COLUMNS = ["period", "bus", "v_pu"]
TOPOLOGY_COLUMNS = ["from_node", "to_node", "cost"]

_INPUT_ERRORS = (CaseFormatError, ValidationError, ScenarioError, DimensionError, NoCandidatesError, OSError)


@dataclass
class RunConfig:
    case_path: str
    scenario_path: str
    output_dir: str
    mode: str = "both"
    verbosity: int = 0

    def __post_init__(self):
        for name in ("case_path", "scenario_path", "output_dir"):
            if not str(getattr(self, name)).strip():
                raise ValidationError(f"{name} must not be empty")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")


@dataclass
class ResultBundle:
    """Everything ``run`` writes: a JSON summary plus plot-ready tables."""

    summary: Dict[str, Any]
    dispatch: pd.DataFrame
    ess: pd.DataFrame
    voltages: pd.DataFrame
    topology_pre: pd.DataFrame
    topology_post: Optional[pd.DataFrame] = None

    def tables(self) -> Dict[str, pd.DataFrame]:
        out = {
            "dispatch.csv": self.dispatch,
            "ess.csv": self.ess,
            "voltages.csv": self.voltages,
            "topology_pre.csv": self.topology_pre,
        }
        if self.topology_post is not None:
            out["topology_post.csv"] = self.topology_post
        return out

    def write(self, output_dir) -> List[Path]:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "summary.json"]
        written[0].write_text(json.dumps(self.summary, indent=2) + "\n", encoding="utf-8", newline="\n")
        for name, table in self.tables().items():
            write_table(table, out / name)
            written.append(out / name)
        stale = out / "topology_post.csv"
        if self.topology_post is None and stale.exists():
            logger.info("removing %s left by an earlier run", stale)
            stale.unlink()
        return written


def write_table(table: pd.DataFrame, path: Path) -> None:
    table.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def _number(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def dispatch_table(result: DispatchResult, case: PowerCase) -> pd.DataFrame:
    """One row per period and generator; generators keep their row number in the case file."""
    numbers = [gen.row if gen.row is not None else g + 1 for g, gen in enumerate(case.generators)]
    rows = []
    for t, dispatch in zip(result.periods, result.dispatches):
        for number, p, q in zip(numbers, dispatch.p_gen, dispatch.q_gen):
            rows.append((t, number, float(p), float(q)))
    return pd.DataFrame(rows, columns=DISPATCH_COLUMNS)


def ess_table(result: DispatchResult, case: PowerCase) -> pd.DataFrame:
    rows = []
    for t, dispatch, energy in zip(result.periods, result.dispatches, result.ess_energy):
        for u, unit in enumerate(case.ess_units):
            p = float(dispatch.p_ess[u]) if dispatch.p_ess.size else 0.0
            rows.append((t, unit.bus, p, float(energy[u])))
    return pd.DataFrame(rows, columns=ESS_COLUMNS)


def voltage_table(result: DispatchResult) -> pd.DataFrame:
    rows = []
    for t, state in zip(result.periods, result.states):
        for bus, v in zip(state.bus_ids, state.v):
            rows.append((t, bus, float(v)))
    return pd.DataFrame(rows, columns=VOLTAGE_COLUMNS)


def topology_table(solution: TopologySolution, graph: CyberGraph) -> pd.DataFrame:
    return pd.DataFrame(solution.edge_rows(graph), columns=TOPOLOGY_COLUMNS)


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------

def _run_summary(result: DispatchResult) -> Dict[str, Any]:
    return {
        "status": result.status.value,
        "generation_cost": _number(result.generation_cost),
        "degradation_cost": _number(result.degradation_cost),
        "max_mismatch_pu": _number(result.max_mismatch),
        "iterations": result.iterations,
    }


def _topology_summary(solution: TopologySolution) -> Dict[str, Any]:
    return {
        "status": solution.status.value,
        "root": solution.root,
        "cost": _number(solution.total_cost),
        "nodes": sorted(solution.active_nodes),
        "links": [list(link) for link in solution.active_links],
    }


def build_summary(case: PowerCase, scenario: Scenario, report: ResilienceReport, mode: str) -> Dict[str, Any]:
    attack = scenario.attack
    costs = report.costs
    weighted = costs.weighted
    summary: Dict[str, Any] = {
        "mode": mode,
        "case": {"buses": case.n_bus, "lines": len(case.lines), "generators": len(case.generators),
                 "base_mva": case.base_mva},
        "horizon": {"periods": scenario.horizon, "period_hours": scenario.period_hours},
        "alphas": list(scenario.alphas),
        "attack": None if attack is None else {
            "period": attack.attack_period,
            "compromised_node": attack.compromised_cyber_node,
            "generator_bus": attack.disabled_generator_bus,
        },
        "costs": {
            "f_cyber": _number(costs.f_cyber),
            "f_power": _number(costs.f_power),
            "f_res": _number(costs.f_res),
            "weighted_cyber": _number(weighted[0]),
            "weighted_power": _number(weighted[1]),
            "weighted_res": _number(weighted[2]),
            "total": _number(costs.total),
        },
        "chosen_candidate": report.chosen_candidate,
        "replacement": report.replacement,
        "candidates": [
            {"node": e.candidate, "status": e.status.value, "feasible": e.feasible,
             "cyber_cost": _number(e.cyber_cost), "replacement_cost": _number(e.replacement_cost)}
            for e in report.candidates
        ],
        "active_ess_buses": [case.ess_units[u].bus for u in report.active_ess],
        "runs": {"baseline": _run_summary(report.baseline)},
        "topology": {"pre": _topology_summary(report.pre_attack_topology)},
    }
    if attack is not None:
        summary["runs"]["mitigated"] = _run_summary(report.attacked)
        if report.unmitigated is not None:
            summary["runs"]["unmitigated"] = _run_summary(report.unmitigated)
        summary["topology"]["post"] = _topology_summary(report.post_attack_topology)
    if report.voltage_traces:
        summary["voltage_traces"] = {"bus": report.trace_bus}
        for name in ("baseline", "unmitigated", "mitigated"):
            if name in report.voltage_traces:
                summary["voltage_traces"][name] = [float(v) for v in report.voltage_traces[name]]
    return summary


def build_bundle(case: PowerCase, scenario: Scenario, report: ResilienceReport, mode: str) -> ResultBundle:
    """Tabulate a finished study; the topologies are re-verified before anything is written."""
    work_case = with_scenario_storage(case, scenario)
    problem = TopologyProblem(report.graph, scenario.critical_nodes, scenario.root_node)
    checks = [(report.pre_attack_topology, problem)]
    if scenario.attack is not None and report.chosen_candidate is not None:
        checks.append((report.post_attack_topology,
                       rerouted_problem(problem, scenario.attack.compromised_cyber_node, report.chosen_candidate)))
    for solution, tree_problem in checks:
        tree = verify_tree(solution, tree_problem)
        if not tree.passed:
            raise SolverError("topology failed verification: " + "; ".join(tree.failures))

    result = report.attacked
    bundle = ResultBundle(
        summary=build_summary(work_case, scenario, report, mode),
        dispatch=dispatch_table(result, work_case),
        ess=ess_table(result, work_case),
        voltages=voltage_table(result),
        topology_pre=topology_table(report.pre_attack_topology, report.graph),
    )
    if scenario.attack is not None:
        bundle.topology_post = topology_table(report.post_attack_topology, report.graph)

    horizon = scenario.horizon
    expected = {"dispatch": horizon * len(work_case.generators), "ess": horizon * len(work_case.ess_units),
                "voltages": horizon * work_case.n_bus}
    for name, rows in expected.items():
        if len(getattr(bundle, name)) != rows:
            raise DimensionError(f"{name} table has {len(getattr(bundle, name))} rows, expected {rows}")
    return bundle


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _guarded(action) -> int:
    try:
        return action()
    except OSError as err:
        where = err.filename if err.filename is not None else ""
        return _fail(f"{where}: {err.strerror or err}" if where else str(err), EXIT_INPUT)
    except _INPUT_ERRORS as err:
        return _fail(str(err), EXIT_INPUT)
    except SolverError as err:
        return _fail(f"solver failed ({err.status.value}): {err}", EXIT_SOLVER)


def _load(case_path, scenario_path):
    case = load_case(case_path)
    scenario = load_scenario(scenario_path)
    validate_pairing(case, scenario)
    return case, scenario


def cmd_run(config: RunConfig, policy: Optional[RunPolicy] = None) -> int:
    """Run a study and write summary.json plus the CSV tables into ``config.output_dir``."""

    def action() -> int:
        case, scenario = _load(config.case_path, config.scenario_path)
        run_policy = policy or RunPolicy()
        if config.mode == "baseline":
            scenario = replace(scenario, attack=None)
        elif config.mode == "attack":
            run_policy = replace(run_policy, solve_unmitigated=False)
        report = run_algorithm1(case, scenario, run_policy)
        bundle = build_bundle(case, scenario, report, config.mode)
        written = bundle.write(config.output_dir)
        logger.info("wrote %s", ", ".join(p.name for p in written))
        costs = report.costs
        print(f"total={costs.total!r} f_cyber={costs.f_cyber!r} f_power={costs.f_power!r} f_res={costs.f_res!r}")
        return EXIT_OK

    return _guarded(action)


def cmd_validate(case_path, scenario_path) -> int:
    """Parse and cross-check a case/scenario pair without solving anything."""

    def action() -> int:
        case, scenario = _load(case_path, scenario_path)
        work_case = with_scenario_storage(case, scenario)
        print(f"buses={case.n_bus} lines={len(case.lines)} gens={len(case.generators)} "
              f"ess={len(work_case.ess_units)}")
        print(f"critical={','.join(str(n) for n in sorted(scenario.critical_nodes))} root={scenario.root_node}")
        attack = scenario.attack
        if attack is None:
            print("attack=none")
        else:
            print(f"attack=period:{attack.attack_period} node:{attack.compromised_cyber_node} "
                  f"generator_bus:{attack.disabled_generator_bus}")
        return EXIT_OK

    return _guarded(action)


def cmd_topology(case_path, scenario_path, output_dir=".") -> int:
    """Solve the pre-attack topology only and write topology_pre.csv."""

    def action() -> int:
        case, scenario = _load(case_path, scenario_path)
        graph = mirror_graph(with_scenario_storage(case, scenario), scenario)
        problem = TopologyProblem(graph, scenario.critical_nodes, scenario.root_node)
        solution = solve_milp(build_topology_milp(problem))
        if not solution.status.ok:
            raise SolverError("topology search hit its node limit", solution.status)
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(topology_table(solution, graph), out / "topology_pre.csv")
        print(f"f_cyber={float(solution.total_cost)!r}")
        print("links=" + " ".join(f"{a}-{b}" for a, b in solution.active_links))
        return EXIT_OK

    return _guarded(action)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def configure_logging(verbosity: int = 0) -> None:
    if verbosity > 0:
        level = logging.INFO if verbosity == 1 else logging.DEBUG
    else:
        level = logging.getLevelName(os.environ.get("GRIDEDGE_LOG_LEVEL", "WARNING").upper())
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", required=True, help="MATPOWER case file")
    common.add_argument("--scenario", required=True, help="TOML scenario file")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")

    parser = argparse.ArgumentParser(
        prog="gridedge-resilience",
        description="Cyber-physical resilience studies: AC OPF, cyber topology design and attack recovery")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="run a baseline and/or attack study")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--mode", choices=MODES, default="both")
    run.add_argument("--workers", type=int, default=None, help="parallel solves (default GRIDEDGE_MAX_WORKERS or 4)")

    commands.add_parser("validate", parents=[common], help="parse and check inputs without solving")

    topology = commands.add_parser("topology", parents=[common], help="solve the pre-attack cyber topology only")
    topology.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    if args.command == "validate":
        return cmd_validate(args.case, args.scenario)
    if args.command == "topology":
        return cmd_topology(args.case, args.scenario, args.out)
    try:
        config = RunConfig(args.case, args.scenario, args.out, args.mode, args.verbose)
    except ValidationError as err:
        return _fail(str(err), EXIT_INPUT)
    policy = RunPolicy()
    if args.workers is not None:
        policy.max_workers = max(1, args.workers)
    return cmd_run(config, policy)


if __name__ == "__main__":
    sys.exit(main())
