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
Solver and run policies.

Policies are plain attribute bags: construct one, override the fields you care
about, and pass it to the solve call. Every field has a working default.
"""

import os
from dataclasses import dataclass, field


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        return default


@dataclass
class BasePolicy:
    """Fields shared by every solver policy."""

    max_iters: int = 200


@dataclass
class NlpPolicy(BasePolicy):
    """Options for the interior-point kernel."""

    tol: float = 1e-6
    mu_init: float = 0.1
    kappa_eps: float = 10.0
    tau_min: float = 0.99
    delta_init: float = 1e-8
    delta_growth: float = 10.0
    delta_max: float = 1e40
    max_backtracks: int = 30
    armijo: float = 1e-4
    bound_relax_factor: float = 1e-9
    # objective is scaled so its initial gradient norm is at most this
    obj_scale_max_gradient: float = 100.0
    restoration_iters: int = 25


@dataclass
class MilpPolicy(BasePolicy):
    """Options for the branch-and-bound topology solver."""

    max_iters: int = 200_000
    int_tol: float = 1e-6
    cost_tol: float = 1e-9


@dataclass
class RunPolicy:
    """Options for a complete resilience study."""

    nlp: NlpPolicy = field(default_factory=NlpPolicy)
    milp: MilpPolicy = field(default_factory=MilpPolicy)
    max_workers: int = field(default_factory=lambda: _env_int("GRIDEDGE_MAX_WORKERS", 4))
    solve_unmitigated: bool = True
