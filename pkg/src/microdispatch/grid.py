"""Static problem description: radial feeder, DER fleet, prices and profiles.

A case is one JSON document. Profiles are either inline arrays or the name of
a CSV sidecar (``hour,value`` header) resolved relative to the case file.
All data are kept in engineering units (kW, kVAr, ohm); per-unit conversion
happens on demand through :class:`Base`.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .der import ChpParams, EssParams, PvParams, WtParams
from .errors import ParseError, TopologyError, UnknownBranch, ValidationError

DER_KINDS = ("WT", "PV", "CHP", "ESS")
_PARAM_TYPES = {"WT": WtParams, "PV": PvParams, "CHP": ChpParams, "ESS": EssParams}


@dataclass(frozen=True)
class Bus:
    id: int
    load_p_peak: float = 0.0
    load_q_peak: float = 0.0
    load_shape_ref: str = "load"


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    length: float = 1.0
    failure_rate: float = 0.0
    has_sectionalizer: bool = True


@dataclass(frozen=True)
class EmissionCoefs:
    """Coefficients of alpha + beta*p + gamma*p^2 + zeta*exp(lam*p), kg/h."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    zeta: float = 0.0
    lam: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.zeta, self.lam)


@dataclass(frozen=True)
class DerUnit:
    name: str
    kind: str
    bus: int
    params: WtParams | PvParams | ChpParams | EssParams
    p_min: float
    p_max: float
    om_rate: float = 0.0
    emission: EmissionCoefs = field(default_factory=EmissionCoefs)
    power_factor: float = 1.0

    @property
    def q_ratio(self) -> float:
        """Reactive-to-active ratio implied by the fixed power factor."""
        if self.power_factor >= 1.0:
            return 0.0
        return math.tan(math.acos(self.power_factor))


@dataclass(frozen=True)
class PriceBook:
    grid_energy_price: tuple[float, ...]
    gas_price: float = 0.0
    heat_credit: float = 0.0
    loss_price: float = 0.0
    interruption_price: float = 0.0
    emission_price: float = 0.0


@dataclass(frozen=True)
class Horizon:
    steps: int = 24
    dt: float = 1.0


@dataclass(frozen=True)
class Base:
    s_base_kva: float = 1000.0
    v_base_kv: float = 12.66
    slack_voltage_pu: float = 1.0
    impedance_unit: str = "ohm"

    @property
    def z_base_ohm(self) -> float:
        return self.v_base_kv**2 * 1000.0 / self.s_base_kva

    def z_pu(self, value: float) -> float:
        return value if self.impedance_unit == "pu" else value / self.z_base_ohm


@dataclass(frozen=True)
class Weights:
    h1: float = 1.0
    h2: float = 1.0
    h_c: float = 1.0


@dataclass(frozen=True)
class ReliabilityConfig:
    t_res: float = 1.0  # fault location / isolation, h
    t_rep: float = 4.0  # repair, h


@dataclass(frozen=True)
class GridTie:
    limit_kw: float = math.inf


@dataclass(frozen=True)
class PenaltyConfig:
    rho_power: float = 1e4  # $ per kW^2 of unit-limit or tie-limit violation
    rho_soc: float = 1e4  # $ per kWh^2
    rho_voltage: float = 1e4  # $ per pu^2
    v_min: float = 0.95
    v_max: float = 1.05
    divergence: float = 1e9  # $ per non-converged hour
    terminal_soc_band: float | None = 0.05  # fraction of capacity; None disables


@dataclass(frozen=True)
class UncertaintyConfig:
    load_sigma: float = 0.05
    load_levels: int | None = None  # odd level count -> sample a discretised normal
    wind_model: str = "rayleigh"  # rayleigh | weibull | fixed
    weibull_shape: float = 4.0
    clearness_mean: float | tuple[float, ...] = 0.7
    clearness_sigma: float | tuple[float, ...] = 0.1
    price_sigma: float = 0.0

    def __post_init__(self):
        if self.wind_model not in ("rayleigh", "weibull", "fixed"):
            raise ValueError(f"unknown wind_model {self.wind_model!r}")
        if self.load_sigma < 0 or self.price_sigma < 0:
            raise ValueError("sigmas must be >= 0")
        if self.load_levels is not None and (self.load_levels < 3 or self.load_levels % 2 == 0):
            raise ValueError("load_levels must be an odd integer >= 3")
        if self.weibull_shape <= 0:
            raise ValueError("weibull_shape must be > 0")


@dataclass(frozen=True)
class Topology:
    root: int
    order: tuple[int, ...]  # branch ids, parent before child
    parent_branch: Mapping[int, int]  # bus id -> id of the branch feeding it
    children: Mapping[int, tuple[int, ...]]  # bus id -> outgoing branch ids


@dataclass(frozen=True, eq=False)
class NetworkCase:
    name: str
    base: Base
    horizon: Horizon
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    ders: tuple[DerUnit, ...]
    prices: PriceBook
    profiles: Mapping[str, tuple[float, ...]]
    weights: Weights = Weights()
    reliability: ReliabilityConfig = ReliabilityConfig()
    tie: GridTie = GridTie()
    penalties: PenaltyConfig = PenaltyConfig()
    uncertainty: UncertaintyConfig = UncertaintyConfig()

    @cached_property
    def topology(self) -> Topology:
        return _build_topology(self)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def branch_by_id(self) -> dict[int, Branch]:
        return {br.id: br for br in self.branches}

    def units(self, kind: str) -> list[DerUnit]:
        return [d for d in self.ders if d.kind == kind]

    def profile(self, name: str) -> np.ndarray:
        return np.asarray(self.profiles[name], dtype=float)

    def bus_loads(self) -> tuple[np.ndarray, np.ndarray]:
        """Forecast (P, Q) loads in kW/kVAr, shape (steps, n_buses)."""
        shapes = np.stack([self.profile(b.load_shape_ref) for b in self.buses], axis=1)
        p = shapes * np.array([b.load_p_peak for b in self.buses])
        q = shapes * np.array([b.load_q_peak for b in self.buses])
        return p, q


def validate_radial(case: NetworkCase) -> list[int]:
    """Branch ids ordered so that every branch comes after the one feeding it."""
    return list(case.topology.order)


def subtree_of(case: NetworkCase, branch: int) -> frozenset[int]:
    """Bus ids whose path to the root runs through ``branch``."""
    try:
        br = case.branch_by_id[branch]
    except KeyError:
        raise UnknownBranch(branch) from None
    topo = case.topology
    out = []
    stack = [br.to_bus]
    while stack:
        bus = stack.pop()
        out.append(bus)
        stack.extend(case.branch_by_id[c].to_bus for c in topo.children[bus])
    return frozenset(out)


def _build_topology(case: NetworkCase) -> Topology:
    bus_ids = [b.id for b in case.buses]
    known = set(bus_ids)
    if len(case.branches) != len(bus_ids) - 1:
        raise TopologyError(
            f"a radial network needs {len(bus_ids) - 1} branches, got {len(case.branches)}"
        )
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {b: [] for b in bus_ids}
    for br in case.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise TopologyError(f"branch {br.id} references unknown bus {end}")
        if br.from_bus == br.to_bus:
            raise TopologyError(f"branch {br.id} is a self loop")
        if br.to_bus in parent:
            raise TopologyError(f"bus {br.to_bus} is fed by more than one branch")
        parent[br.to_bus] = br.id
        children[br.from_bus].append(br.id)
    roots = [b for b in bus_ids if b not in parent]
    if len(roots) != 1:
        raise TopologyError(f"expected exactly one root bus, found {roots}")
    root = roots[0]
    by_id = {br.id: br for br in case.branches}
    for kids in children.values():
        kids.sort()
    order: list[int] = []
    seen = {root}
    queue = deque([root])
    while queue:
        bus = queue.popleft()
        for bid in children[bus]:
            nxt = by_id[bid].to_bus
            if nxt in seen:
                raise TopologyError(f"cycle through bus {nxt}")
            seen.add(nxt)
            order.append(bid)
            queue.append(nxt)
    if len(seen) != len(bus_ids):
        missing = sorted(known - seen)
        raise TopologyError(f"buses not reachable from root {root}: {missing}")
    return Topology(
        root=root,
        order=tuple(order),
        parent_branch=dict(parent),
        children={k: tuple(v) for k, v in children.items()},
    )


# ---------------------------------------------------------------------------
# (de)serialisation


def load_case(path: str | Path) -> NetworkCase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read case file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return case_from_dict(doc, base_dir=path.parent)


def save_case(case: NetworkCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2) + "\n", encoding="utf-8")


def read_profile_csv(path: Path, steps: int) -> tuple[float, ...]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["hour", "value"]:
        raise ParseError(f"{path}: header must be 'hour,value'")
    values: dict[int, float] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            values[int(row[0])] = float(row[1])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}:{line}: {exc}") from exc
    if sorted(values) != list(range(steps)):
        raise ParseError(f"{path}: hours must be exactly 0..{steps - 1}")
    return tuple(values[h] for h in range(steps))


def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ValidationError(f"{where}.{key}" if where else key, "missing required field")
    return doc[key]


def _build(cls, doc: Mapping | None, where: str, **overrides):
    doc = dict(doc or {})
    names = {f.name for f in fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ValidationError(f"{where}.{sorted(unknown)[0]}", "unknown field")
    doc.update(overrides)
    for k, v in doc.items():
        if isinstance(v, list):
            doc[k] = tuple(v)
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ValidationError(where, str(exc)) from exc
    except ValueError as exc:
        raise ValidationError(where, str(exc)) from exc


def case_from_dict(doc: Mapping[str, Any], base_dir: Path | None = None) -> NetworkCase:
    if not isinstance(doc, Mapping):
        raise ParseError("case document must be a JSON object")
    base = _build(Base, doc.get("base"), "base")
    if base.impedance_unit not in ("ohm", "pu"):
        raise ValidationError("base.impedance_unit", "must be 'ohm' or 'pu'")
    if base.s_base_kva <= 0 or base.v_base_kv <= 0 or base.slack_voltage_pu <= 0:
        raise ValidationError("base", "bases and slack voltage must be > 0")
    horizon = _build(Horizon, doc.get("horizon"), "horizon")
    if not isinstance(horizon.steps, int) or horizon.steps < 1:
        raise ValidationError("horizon.steps", "must be an integer >= 1")
    if not horizon.dt > 0:
        raise ValidationError("horizon.dt", "must be > 0")

    buses = tuple(_build(Bus, b, f"buses[{i}]") for i, b in enumerate(_require(doc, "buses", "")))
    seen: set[int] = set()
    for i, b in enumerate(buses):
        if b.id in seen:
            raise ValidationError(f"buses[{i}].id", f"duplicate bus id {b.id}")
        seen.add(b.id)
        if b.load_p_peak < 0 or b.load_q_peak < 0:
            raise ValidationError(f"buses[{i}]", "loads must be >= 0")

    branches = tuple(
        _build(Branch, b, f"branches[{i}]") for i, b in enumerate(_require(doc, "branches", ""))
    )
    seen = set()
    for i, br in enumerate(branches):
        where = f"branches[{i}]"
        if br.id in seen:
            raise ValidationError(f"{where}.id", f"duplicate branch id {br.id}")
        seen.add(br.id)
        if br.r < 0 or br.x < 0:
            raise ValidationError(where, "r and x must be >= 0")
        if not br.length > 0:
            raise ValidationError(f"{where}.length", "must be > 0")
        if br.failure_rate < 0:
            raise ValidationError(f"{where}.failure_rate", "must be >= 0")

    bus_ids = {b.id for b in buses}
    ders = tuple(_parse_der(d, f"ders[{i}]", bus_ids) for i, d in enumerate(doc.get("ders", [])))
    names = [d.name for d in ders]
    if len(set(names)) != len(names):
        raise ValidationError("ders", "unit names must be unique")

    prices = _build(PriceBook, _require(doc, "prices", ""), "prices")
    if len(prices.grid_energy_price) != horizon.steps:
        raise ValidationError("prices.grid_energy_price", f"needs {horizon.steps} entries")
    for f in fields(PriceBook):
        vals = np.atleast_1d(getattr(prices, f.name))
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValidationError(f"prices.{f.name}", "prices must be finite and >= 0")

    profiles = {}
    for key, value in _require(doc, "profiles", "").items():
        if isinstance(value, str):
            if base_dir is None:
                raise ParseError(f"profile {key!r} refers to a file but no base directory is known")
            profiles[key] = read_profile_csv(Path(base_dir) / value, horizon.steps)
        else:
            profiles[key] = tuple(float(v) for v in value)
        if len(profiles[key]) != horizon.steps:
            raise ValidationError(f"profiles.{key}", f"needs exactly {horizon.steps} entries")
        if not all(math.isfinite(v) for v in profiles[key]):
            raise ValidationError(f"profiles.{key}", "values must be finite")
    for i, b in enumerate(buses):
        if b.load_shape_ref not in profiles:
            raise ValidationError(f"buses[{i}].load_shape_ref", f"unknown profile {b.load_shape_ref!r}")
    if any(d.kind == "WT" for d in ders) and "wind_speed" not in profiles:
        raise ValidationError("profiles.wind_speed", "required when the case has wind turbines")
    if any(d.kind == "PV" for d in ders) and "irradiance" not in profiles:
        raise ValidationError("profiles.irradiance", "required when the case has PV units")

    weights = _build(Weights, doc.get("weights"), "weights")
    if min(weights.h1, weights.h2, weights.h_c) < 0:
        raise ValidationError("weights", "weight multipliers must be >= 0")
    reliability = _build(ReliabilityConfig, doc.get("reliability"), "reliability")
    tie = _build(GridTie, doc.get("tie"), "tie")
    penalties = _build(PenaltyConfig, doc.get("penalties"), "penalties")
    uncertainty = _build(UncertaintyConfig, doc.get("uncertainty"), "uncertainty")
    for name in ("clearness_mean", "clearness_sigma"):
        val = getattr(uncertainty, name)
        if isinstance(val, tuple) and len(val) != horizon.steps:
            raise ValidationError(f"uncertainty.{name}", f"needs {horizon.steps} entries")

    case = NetworkCase(
        name=str(doc.get("name", "case")),
        base=base,
        horizon=horizon,
        buses=buses,
        branches=branches,
        ders=ders,
        prices=prices,
        profiles=profiles,
        weights=weights,
        reliability=reliability,
        tie=tie,
        penalties=penalties,
        uncertainty=uncertainty,
    )
    case.topology  # fail early on non-radial graphs
    return case


def _parse_der(doc: Mapping, where: str, bus_ids: set[int]) -> DerUnit:
    doc = dict(doc)
    kind = _require(doc, "kind", where)
    if kind not in DER_KINDS:
        raise ValidationError(f"{where}.kind", f"must be one of {DER_KINDS}")
    bus = _require(doc, "bus", where)
    if bus not in bus_ids:
        raise ValidationError(f"{where}.bus", f"unknown bus {bus}")
    raw = dict(_require(doc, "params", where))
    if kind == "WT":
        p_min, p_max = doc.get("p_min", 0.0), doc.get("p_max", raw.get("p_rate"))
    elif kind == "PV":
        p_min, p_max = doc.get("p_min", 0.0), doc.get("p_max", raw.get("p_stc"))
    elif kind == "ESS":
        p_min = doc.get("p_min", -raw.get("p_ch_max", 0.0))
        p_max = doc.get("p_max", raw.get("p_dis_max", 0.0))
    else:
        p_min, p_max = _require(doc, "p_min", where), _require(doc, "p_max", where)
        raw.setdefault("p_min", p_min)
        raw.setdefault("p_max", p_max)
    params = _build(_PARAM_TYPES[kind], raw, f"{where}.params")
    if p_min is None or p_max is None or p_min > p_max:
        raise ValidationError(where, "need p_min <= p_max")
    emission = _build(EmissionCoefs, doc.get("emission"), f"{where}.emission")
    if not all(math.isfinite(v) for v in emission.as_tuple()):
        raise ValidationError(f"{where}.emission", "coefficients must be finite")
    pf = float(doc.get("power_factor", 1.0))
    if not 0 < pf <= 1:
        raise ValidationError(f"{where}.power_factor", "must lie in (0, 1]")
    om = float(doc.get("om_rate", 0.0))
    if om < 0:
        raise ValidationError(f"{where}.om_rate", "must be >= 0")
    return DerUnit(
        name=str(doc.get("name", f"{kind.lower()}@{bus}")),
        kind=kind,
        bus=bus,
        params=params,
        p_min=float(p_min),
        p_max=float(p_max),
        om_rate=om,
        emission=emission,
        power_factor=pf,
    )


def _plain(obj) -> Any:
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return None
    return obj


def _dc_dict(obj) -> dict:
    return {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}


def case_to_dict(case: NetworkCase) -> dict[str, Any]:
    """Canonical JSON-ready form: inline profiles, every field explicit."""
    def der(d: DerUnit) -> dict:
        return {
            "name": d.name,
            "kind": d.kind,
            "bus": d.bus,
            "p_min": d.p_min,
            "p_max": d.p_max,
            "om_rate": d.om_rate,
            "power_factor": d.power_factor,
            "emission": _dc_dict(d.emission),
            "params": _dc_dict(d.params),
        }

    tie = {"limit_kw": _plain(case.tie.limit_kw)}
    out = {
        "name": case.name,
        "base": _dc_dict(case.base),
        "horizon": _dc_dict(case.horizon),
        "buses": [_dc_dict(b) for b in case.buses],
        "branches": [_dc_dict(b) for b in case.branches],
        "ders": [der(d) for d in case.ders],
        "prices": _dc_dict(case.prices),
        "profiles": {k: list(v) for k, v in case.profiles.items()},
        "weights": _dc_dict(case.weights),
        "reliability": _dc_dict(case.reliability),
        "tie": tie,
        "penalties": _dc_dict(case.penalties),
        "uncertainty": _dc_dict(case.uncertainty),
    }
    # infinite limits serialise as null; drop them so the loader falls back to defaults
    if tie["limit_kw"] is None:
        del out["tie"]
    for d in out["ders"]:
        if d["params"].get("p_max") is None and "p_max" in d["params"]:
            del d["params"]["p_max"]
    return out
