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
Data model for the cyber-physical test system.

A ``PowerCase`` holds the physical network (buses, series lines, generators,
loads, storage units); a ``Scenario`` holds everything about a study that is
not physics: horizon, load profile, cyber costs, critical nodes and the attack.
Both are immutable and validated on construction, so a half-built object never
escapes a parser.

MATPOWER input is read through a small subset parser (matrix blocks, scalar
assignments, ``%`` comments). Shunts, line charging, transformer taps and
phase shifters are read and dropped with a warning because the branch model
here is series conductance/susceptance only.
"""

import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .exceptions import CaseFormatError, ScenarioError, UnknownBusError, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)

LinkKey = Tuple[int, int]


def link_key(a: int, b: int) -> LinkKey:
    """Canonical key of an undirected link."""
    return (a, b) if a <= b else (b, a)


# ---------------------------------------------------------------------------
# Physical model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bus:
    id: int
    is_slack: bool = False


@dataclass(frozen=True)
class Line:
    """Series branch between two buses, admittance in per-unit."""

    from_bus: int
    to_bus: int
    g: float
    b: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"line {self.from_bus}-{self.to_bus} is a self-loop")

    @classmethod
    def from_impedance(cls, from_bus: int, to_bus: int, r: float, x: float) -> "Line":
        """Build a line from series resistance and reactance (per-unit)."""
        z2 = r * r + x * x
        if z2 == 0.0:
            raise ValidationError(f"zero-impedance branch {from_bus}-{to_bus}")
        return cls(from_bus, to_bus, r / z2, -x / z2)

    @property
    def impedance(self) -> Tuple[float, float]:
        y2 = self.g * self.g + self.b * self.b
        return self.g / y2, -self.b / y2


@dataclass(frozen=True)
class Generator:
    """Dispatchable unit; powers in MW/MVAr, costs in $/MW²h, $/MWh, $/h."""

    bus: int
    p_min: float
    p_max: float
    cost_c2: float = 0.0
    cost_c1: float = 0.0
    cost_c0: float = 0.0
    q_min: Optional[float] = None
    q_max: Optional[float] = None
    # 1-based row of mpc.gen this unit was read from; None for hand-built cases
    row: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ValidationError(f"generator at bus {self.bus}: p_min {self.p_min} > p_max {self.p_max}")
        if self.q_min is not None and self.q_max is not None and self.q_min > self.q_max:
            raise ValidationError(f"generator at bus {self.bus}: q_min {self.q_min} > q_max {self.q_max}")
        if self.cost_c2 < 0:
            raise ValidationError(f"generator at bus {self.bus}: negative quadratic cost")


@dataclass(frozen=True)
class Load:
    bus: int
    p_load: float
    q_load: float = 0.0


@dataclass(frozen=True)
class EssUnit:
    """Backup storage; positive power charges, energies in MWh."""

    bus: int
    p_min: float
    p_max: float
    e_min: float
    e_max: float
    e_initial: float
    startup_cost: float = 0.0
    degradation_weight: float = 0.0

    def __post_init__(self):
        if not self.p_min <= 0.0 <= self.p_max:
            raise ValidationError(f"ESS at bus {self.bus}: power range must straddle zero")
        if not self.e_min <= self.e_initial <= self.e_max:
            raise ValidationError(f"ESS at bus {self.bus}: initial energy outside [e_min, e_max]")
        if self.degradation_weight < 0:
            raise ValidationError(f"ESS at bus {self.bus}: negative degradation weight")


@dataclass(frozen=True)
class PowerCase:
    """Validated transmission test system."""

    base_mva: float
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    generators: Tuple[Generator, ...]
    loads: Tuple[Load, ...] = ()
    ess_units: Tuple[EssUnit, ...] = ()
    voltage_bounds: Tuple[float, float] = (0.94, 1.06)
    v0: float = 1.0
    bus_index: Mapping[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("buses", "lines", "generators", "loads", "ess_units"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "voltage_bounds", tuple(float(v) for v in self.voltage_bounds))

        if not self.buses:
            raise ValidationError("case has no buses")
        if self.base_mva <= 0:
            raise ValidationError("base_mva must be positive")
        index: Dict[int, int] = {}
        for k, bus in enumerate(self.buses):
            if bus.id in index:
                raise ValidationError(f"duplicate bus id {bus.id}")
            index[bus.id] = k
        object.__setattr__(self, "bus_index", index)

        slacks = [b for b in self.buses if b.is_slack]
        if len(slacks) != 1:
            raise ValidationError(f"expected exactly one slack bus, found {len(slacks)}")

        for line in self.lines:
            for end in (line.from_bus, line.to_bus):
                if end not in index:
                    raise UnknownBusError(end, "line")
        for kind, items in (("generator", self.generators), ("load", self.loads), ("ESS", self.ess_units)):
            for item in items:
                if item.bus not in index:
                    raise UnknownBusError(item.bus, kind)

        v_lo, v_hi = self.voltage_bounds
        if not 0 < v_lo < v_hi:
            raise ValidationError(f"invalid voltage bounds ({v_lo}, {v_hi})")
        if self.v0 <= 0:
            raise ValidationError("v0 must be positive")

    @property
    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.is_slack)

    @property
    def slack_index(self) -> int:
        return self.bus_index[self.slack_bus.id]

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def generators_at(self, bus: int) -> List[int]:
        """Indices of the generators connected at ``bus``."""
        return [k for k, g in enumerate(self.generators) if g.bus == bus]

    def ess_at(self, bus: int) -> List[int]:
        return [k for k, e in enumerate(self.ess_units) if e.bus == bus]

    def with_ess(self, units: Iterable[EssUnit]) -> "PowerCase":
        """Copy of the case with ``units`` appended to its storage list."""
        return replace(self, ess_units=self.ess_units + tuple(units))


# ---------------------------------------------------------------------------
# MATPOWER subset reader / writer
# ---------------------------------------------------------------------------

_BLOCK_START = re.compile(r"^\s*mpc\.(\w+)\s*=\s*([\[{])(.*)$")
_SCALAR = re.compile(r"^\s*mpc\.(\w+)\s*=\s*([^;\[{]+);?\s*$")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|[Ii]nf)$")


def _strip_comment(line: str) -> str:
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _to_float(token: str, lineno: int) -> float:
    if not _NUMBER.match(token):
        raise CaseFormatError(f"bad numeric token {token!r}", lineno)
    return float(token)


def _to_int(value: float, lineno: int, what: str) -> int:
    if not math.isfinite(value) or value != int(value):
        raise CaseFormatError(f"{what} must be an integer, got {value:g}", lineno)
    return int(value)


def _read_blocks(text: str) -> Tuple[Dict[str, float], Dict[str, List[Tuple[int, List[float]]]]]:
    scalars: Dict[str, float] = {}
    blocks: Dict[str, List[Tuple[int, List[float]]]] = {}
    current: Optional[str] = None
    skipping = False
    start_line = 0

    def add_rows(fragment: str, lineno: int):
        for chunk in fragment.split(";"):
            tokens = chunk.replace(",", " ").split()
            if tokens:
                blocks[current].append((lineno, [_to_float(t, lineno) for t in tokens]))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is not None or skipping:
            end = line.find("]") if not skipping else line.find("}")
            body = line if end < 0 else line[:end]
            if not skipping:
                add_rows(body, lineno)
            if end >= 0:
                current, skipping = None, False
            continue
        if line.startswith("function") or line.startswith("mpc.version"):
            continue
        m = _BLOCK_START.match(line)
        if m:
            name, opener, rest = m.groups()
            start_line = lineno
            if opener == "{":
                logger.debug("skipping cell block mpc.%s", name)
                skipping = "}" not in rest
                continue
            current = name
            blocks[name] = []
            end = rest.find("]")
            add_rows(rest if end < 0 else rest[:end], lineno)
            if end >= 0:
                current = None
            continue
        m = _SCALAR.match(line)
        if m:
            name, value = m.group(1), m.group(2).strip()
            if value.startswith("'") or value.startswith('"'):
                continue
            scalars[name] = _to_float(value, lineno)
            continue
        raise CaseFormatError(f"unrecognised statement {line!r}", lineno)

    if current is not None or skipping:
        raise CaseFormatError("unterminated matrix block", start_line)
    return scalars, blocks


def _require(blocks, name: str, min_cols: int):
    if name not in blocks:
        raise CaseFormatError(f"missing table mpc.{name}")
    rows = blocks[name]
    for lineno, row in rows:
        if len(row) < min_cols:
            raise CaseFormatError(f"mpc.{name} row has {len(row)} columns, need {min_cols}", lineno)
    return rows


def _optional_bound(value: float) -> Optional[float]:
    return None if math.isinf(value) else value


def parse_matpower_case(text: str) -> PowerCase:
    """Parse a MATPOWER-style case into a validated ``PowerCase``."""
    scalars, blocks = _read_blocks(text)
    if "baseMVA" not in scalars:
        raise CaseFormatError("missing mpc.baseMVA")
    base = scalars["baseMVA"]

    bus_rows = _require(blocks, "bus", 13)
    branch_rows = _require(blocks, "branch", 4)
    gen_rows = _require(blocks, "gen", 10)
    cost_rows = _require(blocks, "gencost", 4)

    buses: List[Bus] = []
    loads: List[Load] = []
    seen = set()
    v_lo, v_hi = 0.0, math.inf
    for lineno, row in bus_rows:
        bus_id = _to_int(row[0], lineno, "bus id")
        if bus_id in seen:
            raise CaseFormatError(f"duplicate bus id {bus_id}", lineno)
        seen.add(bus_id)
        buses.append(Bus(bus_id, is_slack=_to_int(row[1], lineno, "bus type") == 3))
        if row[2] != 0.0 or row[3] != 0.0:
            loads.append(Load(bus_id, row[2], row[3]))
        if row[4] != 0.0 or row[5] != 0.0:
            logger.warning("bus %d: shunt (Gs=%g, Bs=%g) ignored", bus_id, row[4], row[5])
        v_lo, v_hi = max(v_lo, row[12]), min(v_hi, row[11])

    if "load" in blocks:
        loads = [Load(_to_int(row[0], lineno, "load bus"), row[1], row[2] if len(row) > 2 else 0.0)
                 for lineno, row in _require(blocks, "load", 2)]

    def check_bus(bus_id: int, lineno: int, where: str):
        if bus_id not in seen:
            raise CaseFormatError(f"unknown bus {bus_id} in {where}", lineno)

    lines: List[Line] = []
    for lineno, row in branch_rows:
        f, t = _to_int(row[0], lineno, "branch from bus"), _to_int(row[1], lineno, "branch to bus")
        check_bus(f, lineno, "mpc.branch")
        check_bus(t, lineno, "mpc.branch")
        if len(row) > 10 and row[10] == 0:
            logger.info("branch %d-%d out of service, skipped", f, t)
            continue
        r, x = row[2], row[3]
        if r == 0.0 and x == 0.0:
            raise CaseFormatError(f"zero-impedance branch {f}-{t}", lineno)
        if len(row) > 4 and row[4] != 0.0:
            logger.warning("branch %d-%d: line charging b=%g ignored", f, t, row[4])
        if len(row) > 8 and row[8] not in (0.0, 1.0):
            logger.warning("branch %d-%d: tap ratio %g ignored", f, t, row[8])
        if len(row) > 9 and row[9] != 0.0:
            logger.warning("branch %d-%d: phase shift %g ignored", f, t, row[9])
        try:
            lines.append(Line.from_impedance(f, t, r, x))
        except ValidationError as err:
            raise CaseFormatError(str(err), lineno) from err

    generators: List[Generator] = []
    if len(cost_rows) < len(gen_rows):
        raise CaseFormatError(f"mpc.gencost has {len(cost_rows)} rows for {len(gen_rows)} generators")
    for gen_row, ((lineno, row), (cost_line, cost)) in enumerate(zip(gen_rows, cost_rows), start=1):
        bus_id = _to_int(row[0], lineno, "generator bus")
        check_bus(bus_id, lineno, "mpc.gen")
        if row[7] <= 0:
            logger.info("generator at bus %d out of service, skipped", bus_id)
            continue
        c2, c1, c0 = _polynomial_cost(cost, cost_line)
        try:
            generators.append(Generator(
                bus=bus_id, p_min=row[9], p_max=row[8],
                cost_c2=c2, cost_c1=c1, cost_c0=c0,
                q_min=_optional_bound(row[4]), q_max=_optional_bound(row[3]), row=gen_row,
            ))
        except ValidationError as err:
            raise CaseFormatError(str(err), lineno) from err

    ess_units: List[EssUnit] = []
    if "ess" in blocks:
        for lineno, row in _require(blocks, "ess", 8):
            ess_bus = _to_int(row[0], lineno, "storage bus")
            check_bus(ess_bus, lineno, "mpc.ess")
            try:
                ess_units.append(EssUnit(ess_bus, *row[1:8]))
            except ValidationError as err:
                raise CaseFormatError(str(err), lineno) from err

    if not math.isfinite(v_hi):
        v_lo, v_hi = 0.94, 1.06
    try:
        case = PowerCase(
            base_mva=base, buses=buses, lines=lines, generators=generators,
            loads=loads, ess_units=ess_units, voltage_bounds=(v_lo, v_hi),
            v0=scalars.get("v0", 1.0),
        )
    except UnknownBusError as err:
        raise CaseFormatError(str(err)) from err
    except ValidationError as err:
        raise CaseFormatError(str(err)) from err
    logger.info("parsed case: %d buses, %d lines, %d generators, %d loads",
                case.n_bus, len(case.lines), len(case.generators), len(case.loads))
    return case


def _polynomial_cost(row: Sequence[float], lineno: int) -> Tuple[float, float, float]:
    model, ncoef = _to_int(row[0], lineno, "gencost model"), _to_int(row[3], lineno, "gencost ncost")
    if model != 2:
        raise CaseFormatError("only polynomial gencost (model 2) is supported", lineno)
    if not 1 <= ncoef <= 3:
        raise CaseFormatError(f"polynomial degree {ncoef - 1} not supported", lineno)
    coeffs = list(row[4:4 + ncoef])
    if len(coeffs) != ncoef:
        raise CaseFormatError("gencost row shorter than its coefficient count", lineno)
    coeffs = [0.0] * (3 - ncoef) + coeffs
    return coeffs[0], coeffs[1], coeffs[2]


def _fmt(value: Optional[float], missing: str = "Inf") -> str:
    if value is None:
        return missing
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return repr(float(value))


def _canonical_loads(case: PowerCase) -> bool:
    per_bus: Dict[int, Load] = {}
    for load in case.loads:
        if load.bus in per_bus or (load.p_load == 0.0 and load.q_load == 0.0):
            return False
        per_bus[load.bus] = load
    order = [case.bus_index[ld.bus] for ld in case.loads]
    return order == sorted(order)


def serialize_case(case: PowerCase) -> str:
    """Write ``case`` as MATPOWER text that ``parse_matpower_case`` reads back."""
    gen_buses = {g.bus for g in case.generators}
    canonical = _canonical_loads(case)
    bus_load = {ld.bus: ld for ld in case.loads} if canonical else {}
    v_lo, v_hi = case.voltage_bounds

    out = ["function mpc = gridedge_case", "mpc.version = '2';",
           f"mpc.baseMVA = {_fmt(case.base_mva)};", f"mpc.v0 = {_fmt(case.v0)};", "",
           "%% bus data", "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
           "mpc.bus = ["]
    for bus in case.buses:
        kind = 3 if bus.is_slack else (2 if bus.id in gen_buses else 1)
        load = bus_load.get(bus.id)
        pd, qd = (load.p_load, load.q_load) if load else (0.0, 0.0)
        out.append(f"\t{bus.id}\t{kind}\t{_fmt(pd)}\t{_fmt(qd)}\t0\t0\t1\t{_fmt(case.v0)}\t0\t0\t1"
                   f"\t{_fmt(v_hi)}\t{_fmt(v_lo)};")
    out += ["];", "", "%% generator data",
            "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin", "mpc.gen = ["]
    for gen in case.generators:
        out.append(f"\t{gen.bus}\t0\t0\t{_fmt(gen.q_max, 'Inf')}\t{_fmt(gen.q_min, '-Inf')}\t{_fmt(case.v0)}"
                   f"\t{_fmt(case.base_mva)}\t1\t{_fmt(gen.p_max)}\t{_fmt(gen.p_min)};")
    out += ["];", "", "%% branch data",
            "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
            "mpc.branch = ["]
    for line in case.lines:
        r, x = line.impedance
        out.append(f"\t{line.from_bus}\t{line.to_bus}\t{_fmt(r)}\t{_fmt(x)}\t0\t0\t0\t0\t0\t0\t1\t-360\t360;")
    out += ["];", "", "%% generator cost data", "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0", "mpc.gencost = ["]
    for gen in case.generators:
        out.append(f"\t2\t0\t0\t3\t{_fmt(gen.cost_c2)}\t{_fmt(gen.cost_c1)}\t{_fmt(gen.cost_c0)};")
    out.append("];")
    if not canonical:
        out += ["", "%% load data (bus, Pd, Qd)", "mpc.load = ["]
        out += [f"\t{ld.bus}\t{_fmt(ld.p_load)}\t{_fmt(ld.q_load)};" for ld in case.loads]
        out.append("];")
    if case.ess_units:
        out += ["", "%% storage data", "%\tbus\tPmin\tPmax\tEmin\tEmax\tEinit\tstartup\tdegradation",
                "mpc.ess = ["]
        for e in case.ess_units:
            fields = (e.p_min, e.p_max, e.e_min, e.e_max, e.e_initial, e.startup_cost, e.degradation_weight)
            out.append(f"\t{e.bus}\t" + "\t".join(_fmt(v) for v in fields) + ";")
        out.append("];")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

_STP_LEGACY = {10: 100, 100: 19, 1000: 4, 10000: 2}


def stp_path_cost(bandwidth_mbps: float, legacy: bool = False) -> float:
    """IEEE 802.1D spanning-tree path cost for a link of the given bandwidth.

    The default is the 802.1t long form (20 Tb/s divided by the bandwidth);
    ``legacy=True`` uses the 1998 table, which only defines 10M/100M/1G/10G.
    """
    if bandwidth_mbps <= 0:
        raise ValueError("bandwidth must be positive")
    if legacy:
        try:
            return float(_STP_LEGACY[int(bandwidth_mbps)])
        except KeyError:
            raise ValueError(f"no legacy STP cost for {bandwidth_mbps} Mb/s") from None
    return 20_000_000.0 / bandwidth_mbps


@dataclass(frozen=True)
class CyberCosts:
    """Deployment, link activation and replacement costs of the cyber layer ($)."""

    default_node_cost: float = 1.0
    node_costs: Mapping[int, float] = field(default_factory=dict)
    default_link_cost: float = 1.0
    link_costs: Mapping[LinkKey, float] = field(default_factory=dict)
    default_replacement_cost: float = 0.0
    replacement_costs: Mapping[int, float] = field(default_factory=dict)

    def node_cost(self, node: int) -> float:
        return self.node_costs.get(node, self.default_node_cost)

    def link_cost(self, a: int, b: int) -> float:
        return self.link_costs.get(link_key(a, b), self.default_link_cost)

    def replacement_cost(self, node: int) -> float:
        return self.replacement_costs.get(node, self.default_replacement_cost)


@dataclass(frozen=True)
class AttackSpec:
    attack_period: int
    compromised_cyber_node: int
    disabled_generator_bus: int


@dataclass(frozen=True)
class Scenario:
    horizon: int
    period_hours: float
    critical_nodes: FrozenSet[int]
    root_node: int
    load_scale: Tuple[float, ...] = ()
    attack: Optional[AttackSpec] = None
    alphas: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    cyber_costs: CyberCosts = field(default_factory=CyberCosts)
    candidate_links: Optional[Tuple[LinkKey, ...]] = None
    neighbors: Optional[Tuple[int, ...]] = None
    ess_units: Tuple[EssUnit, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "critical_nodes", frozenset(self.critical_nodes))
        if not self.load_scale:
            object.__setattr__(self, "load_scale", (1.0,) * max(self.horizon, 0))
        object.__setattr__(self, "load_scale", tuple(float(s) for s in self.load_scale))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "ess_units", tuple(self.ess_units))

        if self.horizon < 1:
            raise ScenarioError("horizon must be at least one period", "horizon.periods")
        if self.period_hours <= 0:
            raise ScenarioError("period_hours must be positive", "horizon.period_hours")
        if len(self.load_scale) != self.horizon:
            raise ScenarioError(
                f"load_scale has {len(self.load_scale)} entries for {self.horizon} periods",
                "horizon.load_scale")
        if self.root_node not in self.critical_nodes:
            raise ScenarioError(f"root {self.root_node} is not a critical node", "cyber.root")
        if len(self.alphas) != 3 or any(a <= 0 for a in self.alphas):
            raise ScenarioError("balancing coefficients must be three positive numbers", "alphas")
        if self.attack is not None and not 0 <= self.attack.attack_period < self.horizon:
            raise ScenarioError(
                f"attack period {self.attack.attack_period} outside [0, {self.horizon})", "attack.period")

    @property
    def alpha_cyber(self) -> float:
        return self.alphas[0]

    @property
    def alpha_power(self) -> float:
        return self.alphas[1]

    @property
    def alpha_resilience(self) -> float:
        return self.alphas[2]


_SCENARIO_KEYS = {
    "horizon": {"periods", "period_hours", "load_scale"},
    "cyber": {"critical_nodes", "root", "candidate_links", "neighbors"},
    "costs": {"default_node_cost", "node_costs", "default_link_cost", "link_costs",
              "link_bandwidths", "stp_legacy", "default_replacement_cost", "replacement_costs"},
    "attack": {"period", "compromised_node", "generator_bus"},
    "alphas": {"alpha1", "alpha2", "alpha3"},
    "ess": {"bus", "p_min", "p_max", "e_min", "e_max", "e_initial", "startup_cost", "degradation_weight"},
}
_REQUIRED = {
    "horizon": ("periods", "period_hours"),
    "cyber": ("critical_nodes", "root"),
    "attack": ("period", "compromised_node", "generator_bus"),
    "ess": ("bus", "p_min", "p_max", "e_min", "e_max", "e_initial"),
}


def _check_keys(section: str, table: Mapping) -> None:
    if not isinstance(table, Mapping):
        raise ScenarioError(f"[{section}] must be a table", section)
    for key in table:
        if key not in _SCENARIO_KEYS[section]:
            raise ScenarioError(f"unknown key {section}.{key}", f"{section}.{key}")
    for key in _REQUIRED.get(section, ()):
        if key not in table:
            raise ScenarioError(f"missing required key {section}.{key}", f"{section}.{key}")


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{key} must be an integer, got {value!r}", key)
    return value


def _as_float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{key} must be a finite number, got {value!r}", key)
    return float(value)


def _as_list(value, key: str) -> list:
    if not isinstance(value, list):
        raise ScenarioError(f"{key} must be a list, got {value!r}", key)
    return value


def _node_map(section: str, key: str, raw) -> Dict[int, float]:
    name = f"{section}.{key}"
    if not isinstance(raw, Mapping):
        raise ScenarioError(f"{name} must map node ids to numbers", name)
    out: Dict[int, float] = {}
    for node, value in raw.items():
        try:
            out[int(node)] = _as_float(value, name)
        except ValueError:
            raise ScenarioError(f"{name} key {node!r} is not a node id", name) from None
    return out


def _link_table(key: str, raw) -> Dict[LinkKey, float]:
    name = f"costs.{key}"
    out: Dict[LinkKey, float] = {}
    for entry in _as_list(raw, name):
        if not isinstance(entry, list) or len(entry) != 3:
            raise ScenarioError(f"{name} entries must be [node, node, value]", name)
        a, b, value = _as_int(entry[0], name), _as_int(entry[1], name), _as_float(entry[2], name)
        if a == b:
            raise ScenarioError(f"{name} has a self-loop at {a}", name)
        out[link_key(a, b)] = value
    return out


def _link_list(raw) -> Tuple[LinkKey, ...]:
    name = "cyber.candidate_links"
    links = []
    for entry in _as_list(raw, name):
        if not isinstance(entry, list) or len(entry) != 2:
            raise ScenarioError(f"{name} entries must be [node, node]", name)
        links.append(link_key(_as_int(entry[0], name), _as_int(entry[1], name)))
    return tuple(links)


def parse_scenario(text: str) -> Scenario:
    """Parse a TOML scenario file (see docs/scenario_format.md)."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ScenarioError(f"scenario syntax error: {err}") from err

    for section in doc:
        if section not in _SCENARIO_KEYS:
            raise ScenarioError(f"unknown section [{section}]", section)
    for section in ("horizon", "cyber"):
        if section not in doc:
            raise ScenarioError(f"missing required section [{section}]", section)

    horizon = doc["horizon"]
    _check_keys("horizon", horizon)
    cyber = doc["cyber"]
    _check_keys("cyber", cyber)

    costs_raw = doc.get("costs", {})
    _check_keys("costs", costs_raw)
    link_costs = _link_table("link_costs", costs_raw.get("link_costs", []))
    legacy = costs_raw.get("stp_legacy", False)
    if not isinstance(legacy, bool):
        raise ScenarioError(f"costs.stp_legacy must be true or false, got {legacy!r}", "costs.stp_legacy")
    try:
        for key, mbps in _link_table("link_bandwidths", costs_raw.get("link_bandwidths", [])).items():
            link_costs[key] = stp_path_cost(mbps, legacy=legacy)
    except ValueError as err:
        raise ScenarioError(str(err), "costs.link_bandwidths") from err
    costs = CyberCosts(
        default_node_cost=_as_float(costs_raw.get("default_node_cost", 1.0), "costs.default_node_cost"),
        node_costs=_node_map("costs", "node_costs", costs_raw.get("node_costs", {})),
        default_link_cost=_as_float(costs_raw.get("default_link_cost", 1.0), "costs.default_link_cost"),
        link_costs=link_costs,
        default_replacement_cost=_as_float(costs_raw.get("default_replacement_cost", 0.0),
                                           "costs.default_replacement_cost"),
        replacement_costs=_node_map("costs", "replacement_costs", costs_raw.get("replacement_costs", {})),
    )
    if any(v < 0 for v in (costs.default_node_cost, costs.default_link_cost, costs.default_replacement_cost)) \
            or any(v < 0 for m in (costs.node_costs, costs.link_costs, costs.replacement_costs) for v in m.values()):
        raise ScenarioError("cyber costs must be non-negative", "costs")

    attack = None
    if "attack" in doc:
        raw = doc["attack"]
        _check_keys("attack", raw)
        attack = AttackSpec(_as_int(raw["period"], "attack.period"),
                            _as_int(raw["compromised_node"], "attack.compromised_node"),
                            _as_int(raw["generator_bus"], "attack.generator_bus"))

    alphas = (1.0, 1.0, 1.0)
    if "alphas" in doc:
        raw = doc["alphas"]
        _check_keys("alphas", raw)
        alphas = tuple(_as_float(raw.get(k, 1.0), f"alphas.{k}") for k in ("alpha1", "alpha2", "alpha3"))

    ess_units = []
    ess_raw = doc.get("ess", [])
    if isinstance(ess_raw, Mapping):
        ess_raw = [ess_raw]
    for unit in _as_list(ess_raw, "ess"):
        _check_keys("ess", unit)
        values = {key: _as_float(unit[key], f"ess.{key}")
                  for key in ("p_min", "p_max", "e_min", "e_max", "e_initial")}
        try:
            ess_units.append(EssUnit(
                bus=_as_int(unit["bus"], "ess.bus"), **values,
                startup_cost=_as_float(unit.get("startup_cost", 0.0), "ess.startup_cost"),
                degradation_weight=_as_float(unit.get("degradation_weight", 0.0), "ess.degradation_weight"),
            ))
        except ValidationError as err:
            raise ScenarioError(str(err), "ess") from err

    candidate_links = _link_list(cyber["candidate_links"]) if "candidate_links" in cyber else None
    neighbors = None
    if "neighbors" in cyber:
        neighbors = tuple(_as_int(n, "cyber.neighbors") for n in _as_list(cyber["neighbors"], "cyber.neighbors"))

    scenario = Scenario(
        horizon=_as_int(horizon["periods"], "horizon.periods"),
        period_hours=_as_float(horizon["period_hours"], "horizon.period_hours"),
        load_scale=tuple(_as_float(s, "horizon.load_scale")
                         for s in _as_list(horizon.get("load_scale", []), "horizon.load_scale")),
        critical_nodes=frozenset(_as_int(n, "cyber.critical_nodes")
                                 for n in _as_list(cyber["critical_nodes"], "cyber.critical_nodes")),
        root_node=_as_int(cyber["root"], "cyber.root"),
        attack=attack,
        alphas=alphas,
        cyber_costs=costs,
        candidate_links=candidate_links,
        neighbors=neighbors,
        ess_units=tuple(ess_units),
    )
    logger.info("parsed scenario: T=%d, K=%s, root=%d, attack=%s",
                scenario.horizon, sorted(scenario.critical_nodes), scenario.root_node,
                "none" if attack is None else f"period {attack.attack_period} node {attack.compromised_cyber_node}")
    return scenario


def validate_pairing(case: PowerCase, scenario: Scenario) -> None:
    """Cross-check a scenario against the case it will run on."""
    for node in scenario.critical_nodes:
        if node not in case.bus_index:
            raise ScenarioError(f"critical node {node} has no matching bus", "cyber.critical_nodes")
    for unit in scenario.ess_units:
        if unit.bus not in case.bus_index:
            raise ScenarioError(f"ESS bus {unit.bus} not in case", "ess.bus")
    if scenario.attack is not None:
        attack = scenario.attack
        if attack.compromised_cyber_node not in case.bus_index:
            raise ScenarioError(f"compromised node {attack.compromised_cyber_node} not in case",
                                "attack.compromised_node")
        if not case.generators_at(attack.disabled_generator_bus):
            raise ScenarioError(f"no generator at bus {attack.disabled_generator_bus}", "attack.generator_bus")


def data_path(name: str) -> Path:
    """Location of a bundled data file; ``GRIDEDGE_DATA_DIR`` overrides the package copy."""
    base = os.environ.get("GRIDEDGE_DATA_DIR")
    return (Path(base) if base else Path(__file__).parent / "data") / name


def load_case(path: Union[str, Path]) -> PowerCase:
    """Read and parse a MATPOWER case file; format errors name the file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise CaseFormatError(f"{path}: not a UTF-8 text file") from err
    try:
        return parse_matpower_case(text)
    except CaseFormatError as err:
        raise CaseFormatError(f"{path}: {err}") from err


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as err:
        raise ScenarioError(f"{path}: not a UTF-8 text file") from err
    try:
        return parse_scenario(text)
    except ScenarioError as err:
        raise ScenarioError(f"{path}: {err}", err.key) from err
