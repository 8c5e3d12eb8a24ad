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

import asyncio
import logging
import os

from gridedge_resilience import (
    RunPolicy, data_path, load_case, load_scenario, run_algorithm1_async, with_scenario_storage,
)


async def main():
    logging.basicConfig(level=os.environ.get("GRIDEDGE_LOG_LEVEL", "INFO"))
    case = load_case(data_path("case14.m"))
    scenario = load_scenario(data_path("ieee14_attack.toml"))
    report = await run_algorithm1_async(case, scenario, RunPolicy())

    costs = report.costs
    print(f"chosen replacement: node {report.chosen_candidate}")
    print(f"f_cyber={costs.f_cyber:.2f} f_power={costs.f_power:.2f} f_res={costs.f_res:.2f} total={costs.total:.2f}")
    print(f"pre-attack links:  {list(report.pre_attack_topology.active_links)}")
    print(f"post-attack links: {list(report.post_attack_topology.active_links)}")

    bus = report.trace_bus
    print(f"\nvoltage at bus {bus} (pu)")
    print("period  baseline  unmitigated  mitigated")
    traces = report.voltage_traces
    for t in range(scenario.horizon):
        unmitigated = traces["unmitigated"][t] if "unmitigated" in traces else float("nan")
        print(f"{t:6d}  {traces['baseline'][t]:8.4f}  {unmitigated:11.4f}  {traces['mitigated'][t]:9.4f}")

    work_case = with_scenario_storage(case, scenario)
    for u in report.active_ess:
        print(f"\nstorage at bus {work_case.ess_units[u].bus}")
        for t, dispatch, energy in zip(report.attacked.periods, report.attacked.dispatches, report.attacked.ess_energy):
            print(f"  period {t:2d}: P={dispatch.p_ess[u]:+7.2f} MW  E={energy[u]:7.2f} MWh")


if __name__ == "__main__":
    asyncio.run(main())
