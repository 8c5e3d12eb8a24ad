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

# Users can import: from gridedge_resilience.exceptions import GridEdgeError

from enum import Enum
from typing import Optional


class SolveStatus(Enum):
    """Outcome of a continuous or mixed-integer solve."""

    CONVERGED = "converged"
    OPTIMAL = "optimal"
    ITER_LIMIT = "iter_limit"
    INFEASIBLE = "infeasible"

    @property
    def ok(self) -> bool:
        return self in (SolveStatus.CONVERGED, SolveStatus.OPTIMAL)


class GridEdgeError(Exception):
    """Base exception class for all gridedge_resilience errors."""


class CaseFormatError(GridEdgeError):
    """Raised when a case file cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(GridEdgeError):
    """Raised when a data model invariant is violated."""


class UnknownBusError(ValidationError):
    """Raised when an element references a bus that does not exist."""

    def __init__(self, bus, where: str = ""):
        self.bus = bus
        suffix = f" in {where}" if where else ""
        super().__init__(f"unknown bus {bus}{suffix}")


class ScenarioError(GridEdgeError):
    """Raised when a scenario file is missing keys or violates an invariant."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)


class DimensionError(GridEdgeError):
    """Raised when vector or matrix shapes disagree."""


class SolverError(GridEdgeError):
    """Raised when a solver does not reach a usable solution."""

    def __init__(self, message: str, status: SolveStatus = SolveStatus.INFEASIBLE):
        self.status = status
        super().__init__(message)


class InfeasibleError(SolverError):
    """Raised when a problem has no feasible point."""

    def __init__(self, message: str):
        super().__init__(message, SolveStatus.INFEASIBLE)


class UnrecoverableCyberError(SolverError):
    """Raised when no replacement candidate can reconnect the critical nodes."""

    def __init__(self, message: str = "cyber layer unrecoverable"):
        super().__init__(message, SolveStatus.INFEASIBLE)


class OracleSizeError(GridEdgeError):
    """Raised when the enumeration oracle is asked to search too large a graph."""


class NoCandidatesError(GridEdgeError):
    """Raised when a compromised node has no neighbouring replacement candidates."""

    def __init__(self, node):
        self.node = node
        super().__init__(f"no replacement candidates for node {node}")


__all__ = [
    "SolveStatus",
    "GridEdgeError",
    "CaseFormatError",
    "ValidationError",
    "UnknownBusError",
    "ScenarioError",
    "DimensionError",
    "SolverError",
    "InfeasibleError",
    "UnrecoverableCyberError",
    "OracleSizeError",
    "NoCandidatesError",
]
