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

import sys

from gridedge_resilience import NlpPolicy, data_path, load_case, solve_opf, validate_dispatch


def main():
    case_file = sys.argv[1] if len(sys.argv) > 1 else data_path("case14.m")
    case = load_case(case_file)
    print(f"{case_file}: {case.n_bus} buses, {len(case.lines)} lines, {len(case.generators)} generators")

    for scale in (0.8, 1.0, 1.05):
        result = solve_opf(case, load_scale=scale, options=NlpPolicy(tol=1e-7))
        print(f"load x{scale:.2f}: {result.status.value} after {result.iterations} iterations, "
              f"cost={result.generation_cost:.2f} $/h, max mismatch={result.max_mismatch:.2e} pu")

    result = solve_opf(case)
    dispatch = result.dispatches[0]
    for k, gen in enumerate(case.generators):
        print(f"  gen {k + 1} @ bus {gen.bus}: P={dispatch.p_gen[k]:8.2f} MW  Q={dispatch.q_gen[k]:8.2f} MVAr")
    state = result.states[0]
    for bus, v, theta in zip(state.bus_ids, state.v, state.theta):
        print(f"  bus {bus:3d}: V={v:.4f} pu  theta={theta:+.4f} rad")

    issues = validate_dispatch(case, result)
    print("independent check:", "ok" if not issues else "; ".join(issues))


if __name__ == "__main__":
    main()
