"""Objective evaluation: operating cost, reliability cost and penalties.

The here-and-now decision is a :class:`DispatchSchedule` (CHP setpoints and
signed storage power per hour). Wind and PV deliver all available power and
the grid tie at the root bus balances each scenario (recourse).

The scalar functions (``chp_fuel_cost``, ``om_cost``, ``f1`` ...) are the
readable reference forms. :class:`Evaluator` computes the same quantities for
a whole population of schedules over every scenario and hour with one batched
load flow; the test-suite checks the two agree.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .der import ChpParams, EssParams, PvParams, WtParams, chp_fuel_rate, pv_power, soc_trajectory, wt_power
from .errors import DimensionMismatch, EmissionOverflow, OutOfRange, UnknownBranch
from .grid import NetworkCase, PriceBook, subtree_of
from .powerflow import FlowSolution, solve_batch
from .uncertainty import Scenario, ScenarioSet

DAYS_PER_YEAR = 365.0
EXP_CAP = 700.0
_EPS = 1e-9


# ---------------------------------------------------------------------------
# schedule / genome


@dataclass(frozen=True)
class DispatchSchedule:
    """CHP setpoints (steps, n_chp) in kW and storage power (steps, n_ess) in kW.

    Storage power is signed: positive discharges into the bus.
    """

    chp: np.ndarray
    ess: np.ndarray

    @classmethod
    def from_vector(cls, case: NetworkCase, x) -> "DispatchSchedule":
        steps = case.horizon.steps
        n_chp, n_ess = len(case.units("CHP")), len(case.units("ESS"))
        x = np.asarray(x, dtype=float)
        if x.shape != (steps * (n_chp + n_ess),):
            raise DimensionMismatch(f"expected {steps * (n_chp + n_ess)} genes, got {x.shape}")
        g = x.reshape(steps, n_chp + n_ess)
        return cls(chp=g[:, :n_chp].copy(), ess=g[:, n_chp:].copy())

    @classmethod
    def zeros(cls, case: NetworkCase) -> "DispatchSchedule":
        steps = case.horizon.steps
        return cls(
            chp=np.zeros((steps, len(case.units("CHP")))),
            ess=np.zeros((steps, len(case.units("ESS")))),
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.chp, self.ess], axis=1).ravel()

    def to_dict(self, case: NetworkCase) -> dict:
        out = {"hours": list(range(self.chp.shape[0]))}
        for j, u in enumerate(case.units("CHP")):
            out[u.name] = self.chp[:, j].tolist()
        for j, u in enumerate(case.units("ESS")):
            out[u.name] = self.ess[:, j].tolist()
        return out

    @classmethod
    def from_dict(cls, case: NetworkCase, doc: dict) -> "DispatchSchedule":
        try:
            chp = [doc[u.name] for u in case.units("CHP")]
            ess = [doc[u.name] for u in case.units("ESS")]
        except KeyError as exc:
            raise DimensionMismatch(f"schedule lacks unit {exc}") from None
        steps = case.horizon.steps
        chp_a = np.array(chp, dtype=float).reshape(-1, steps).T if chp else np.zeros((steps, 0))
        ess_a = np.array(ess, dtype=float).reshape(-1, steps).T if ess else np.zeros((steps, 0))
        return cls(chp=chp_a, ess=ess_a)


def genome_bounds(case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    """Box of the flattened schedule: CHP in [p_min, p_max], storage in [-p_ch_max, p_dis_max]."""
    lo_u = [u.p_min for u in case.units("CHP")] + [-u.params.p_ch_max for u in case.units("ESS")]
    hi_u = [u.p_max for u in case.units("CHP")] + [u.params.p_dis_max for u in case.units("ESS")]
    steps = case.horizon.steps
    return np.tile(lo_u, steps).astype(float), np.tile(hi_u, steps).astype(float)


def _check_dims(case: NetworkCase, schedule: DispatchSchedule) -> None:
    steps = case.horizon.steps
    want_c = (steps, len(case.units("CHP")))
    want_e = (steps, len(case.units("ESS")))
    if schedule.chp.shape != want_c or schedule.ess.shape != want_e:
        raise DimensionMismatch(
            f"schedule shapes {schedule.chp.shape}/{schedule.ess.shape}, expected {want_c}/{want_e}"
        )


# ---------------------------------------------------------------------------
# cost components


def chp_fuel_cost(p, chp: ChpParams, prices: PriceBook, check: bool = True):
    """Fuel cost rate in $/h, net of the heat credit."""
    if check and np.any((np.asarray(p) < chp.p_min - _EPS) | (np.asarray(p) > chp.p_max + _EPS)):
        raise OutOfRange(f"CHP setpoint outside [{chp.p_min}, {chp.p_max}]")
    return prices.gas_price * p / chp.efficiency - prices.heat_credit * chp.heat_to_electric * p


def om_cost(p, k_om: float, dt: float):
    """O&M cost in $; storage throughput counts by magnitude."""
    return k_om * np.abs(p) * dt


def emission_mass(p, coefs) -> float:
    """Emission rate in kg/h for output ``p`` kW."""
    a, b, g, z, lam = coefs
    p = np.asarray(p, dtype=float)
    expo = lam * p
    if np.any(expo > EXP_CAP):
        raise EmissionOverflow(f"emission exponent {float(np.max(expo))} exceeds {EXP_CAP}")
    out = a + b * p + g * p * p + z * np.exp(expo)
    return out if out.ndim else float(out)


def res_output(case: NetworkCase, scenario: Scenario | ScenarioSet) -> dict[str, np.ndarray]:
    """Available wind/PV power per unit (kW), shape (..., steps)."""
    steps = case.horizon.steps
    temp = case.profile("temperature") if "temperature" in case.profiles else None
    out = {}
    for u in case.ders:
        if u.kind == "WT":
            out[u.name] = np.minimum(wt_power(scenario.wind_ms, u.params), u.p_max)
        elif u.kind == "PV":
            t_cell = temp if temp is not None else np.full(steps, u.params.t_ref)
            out[u.name] = np.minimum(pv_power(scenario.irradiance_wm2, t_cell, u.params), u.p_max)
    return out


def _renewables(case: NetworkCase):
    return [u for u in case.ders if u.kind in ("WT", "PV")]


def f1(case: NetworkCase, schedule: DispatchSchedule, scenario: Scenario, flows: list[FlowSolution]) -> float:
    """Operating cost of one scenario in $, hour by hour.

    ``flows[t]`` is the load-flow solution of hour t. The network loss is
    priced once per hour for the whole feeder.
    """
    _check_dims(case, schedule)
    dt = case.horizon.dt
    pr = case.prices
    res = res_output(case, scenario)
    total = 0.0
    for t in range(case.horizon.steps):
        for j, u in enumerate(case.units("CHP")):
            p = float(schedule.chp[t, j])
            total += float(chp_fuel_cost(p, u.params, pr)) * dt
            total += float(om_cost(p, u.om_rate, dt))
            total += emission_mass(p, u.emission.as_tuple()) * dt * pr.emission_price
        for j, u in enumerate(case.units("ESS")):
            p = float(schedule.ess[t, j])
            total += float(om_cost(p, u.om_rate, dt))
            total += emission_mass(abs(p), u.emission.as_tuple()) * dt * pr.emission_price
        for u in _renewables(case):
            p = float(res[u.name][t])
            total += float(om_cost(p, u.om_rate, dt))
            total += emission_mass(p, u.emission.as_tuple()) * dt * pr.emission_price
        sol = flows[t]
        total += float(sol.total_loss_kw) * dt * pr.loss_price
        total += float(sol.slack_p_kw) * dt * pr.grid_energy_price[t] * float(scenario.price_mult[t])
    return total


# ---------------------------------------------------------------------------
# reliability


def branch_fault_partition(case: NetworkCase, branch: int) -> tuple[frozenset[int], frozenset[int]]:
    """(N_res, N_rep) for a permanent fault on ``branch``.

    The fault is isolated at the nearest sectionalized branch at or above the
    faulted one (the root if there is none) and everything below that switch
    waits for repair. Buses upstream of the switch ride through, and on a
    purely radial feeder there is no alternative supply, so N_res is empty.
    """
    by_id = case.branch_by_id
    if branch not in by_id:
        raise UnknownBranch(branch)
    topo = case.topology
    up: int | None = branch
    while up is not None and not by_id[up].has_sectionalizer:
        up = topo.parent_branch.get(by_id[up].from_bus)
    if up is None:
        rep = frozenset(b.id for b in case.buses if b.id != topo.root)
    else:
        rep = subtree_of(case, up)
    return frozenset(), rep


def _interruption_weights(case: NetworkCase) -> np.ndarray:
    """Per-bus hours of interruption per year, summed over all branch faults."""
    idx = case.bus_index
    w = np.zeros(len(case.buses))
    rel = case.reliability
    for br in case.branches:
        rate = br.failure_rate * br.length
        if rate == 0:
            continue
        res, rep = branch_fault_partition(case, br.id)
        for b in res:
            w[idx[b]] += rate * rel.t_res
        for b in rep:
            w[idx[b]] += rate * rel.t_rep
    return w


@dataclass(frozen=True)
class ReliabilityResult:
    c_aens: np.ndarray  # $/day per scenario
    ens: np.ndarray  # kWh/day per scenario
    aens: float  # probability-weighted ENS
    eir: float
    demand_kwh: float  # expected daily energy demand


def reliability_cost(case: NetworkCase, scenarios: ScenarioSet) -> ReliabilityResult:
    """Expected interruption cost per scenario, scaled from per-year rates to one day.

    Bus demand during an outage is the scenario's average load over the day.
    """
    load_p, _ = _scenario_loads(case, scenarios)
    avg = load_p.mean(axis=1)  # (S, B)
    ens = avg @ _interruption_weights(case) / DAYS_PER_YEAR
    c_aens = case.prices.interruption_price * ens
    prob = scenarios.probability
    aens = float(prob @ ens)
    demand = float(prob @ load_p.sum(axis=(1, 2))) * case.horizon.dt
    eir = 1.0 - aens / demand if demand > 0 else 1.0
    return ReliabilityResult(c_aens=c_aens, ens=ens, aens=aens, eir=eir, demand_kwh=demand)


def f2(case: NetworkCase, c_aens) -> float:
    """Weighted interruption cost in $/day.

    ``c_aens`` is one microgrid's reliability cost or a sequence with one
    entry per microgrid; the weighted costs are summed.
    """
    return float(case.weights.h_c * np.sum(np.asarray(c_aens, dtype=float)))


# ---------------------------------------------------------------------------
# penalties


def _limit_violation(p, lo, hi):
    return np.maximum(lo - p, 0.0) + np.maximum(p - hi, 0.0)


def schedule_penalty(case: NetworkCase, chp: np.ndarray, ess: np.ndarray) -> np.ndarray:
    """Scenario-independent penalties for schedules of shape (..., steps, units)."""
    pen_cfg = case.penalties
    dt = case.horizon.dt
    total = np.zeros(chp.shape[:-2])
    for j, u in enumerate(case.units("CHP")):
        p = chp[..., j]
        total += pen_cfg.rho_power * np.sum(_limit_violation(p, u.p_min, u.p_max) ** 2, axis=-1)
        if u.params.ramp_limit is not None:
            ramp = np.abs(np.diff(p, axis=-1))
            total += pen_cfg.rho_power * np.sum(np.maximum(ramp - u.params.ramp_limit, 0) ** 2, axis=-1)
    for j, u in enumerate(case.units("ESS")):
        e: EssParams = u.params
        p = ess[..., j]
        total += pen_cfg.rho_power * np.sum(_limit_violation(p, -e.p_ch_max, e.p_dis_max) ** 2, axis=-1)
        soc = soc_trajectory(p, dt, e)
        total += pen_cfg.rho_soc * np.sum(_limit_violation(soc, e.soc_min, e.soc_max) ** 2, axis=-1)
        if pen_cfg.terminal_soc_band is not None:
            excess = np.abs(soc[..., -1] - e.soc_init) - pen_cfg.terminal_soc_band * e.capacity
            total += pen_cfg.rho_soc * np.maximum(excess, 0.0) ** 2
    return total


def network_penalty(case: NetworkCase, v, slack_p_kw, converged) -> np.ndarray:
    """Tie-limit, voltage-band and divergence penalties; hours on the second-to-last axis.

    ``v`` has shape (..., steps, n_bus); the others (..., steps).
    """
    pc = case.penalties
    ok = np.asarray(converged, dtype=bool)
    v = np.where(ok[..., None], v, 1.0)
    grid = np.where(ok, slack_p_kw, 0.0)
    tie = np.maximum(np.abs(grid) - case.tie.limit_kw, 0.0) if math.isfinite(case.tie.limit_kw) else 0 * grid
    volt = _limit_violation(v, pc.v_min, pc.v_max)
    return (
        pc.rho_power * np.sum(tie**2, axis=-1)
        + pc.rho_voltage * np.sum(volt**2, axis=(-2, -1))
        + pc.divergence * np.sum(~ok, axis=-1)
    )


def constraint_penalties(
    case: NetworkCase, schedule: DispatchSchedule, scenario: Scenario, flows: list[FlowSolution]
) -> float:
    """Exterior quadratic penalty in $ for one scenario."""
    _check_dims(case, schedule)
    v = np.stack([np.asarray(f.v) for f in flows])
    slack = np.array([float(f.slack_p_kw) for f in flows])
    conv = np.array([bool(f.converged) for f in flows])
    return float(schedule_penalty(case, schedule.chp, schedule.ess) + network_penalty(case, v, slack, conv))


# ---------------------------------------------------------------------------
# batched evaluation


def _scenario_loads(case: NetworkCase, s: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    fp, fq = case.bus_loads()  # (T, B)
    m = s.load_mult[:, :, None]
    return fp[None] * m, fq[None] * m


@dataclass
class EvaluationReport:
    """Breakdown of one schedule over a scenario set.

    ``per_scenario`` maps field name to a (S,) array, ``expected`` to the
    probability-weighted value, and ``per_hour`` to (steps,) arrays.
    """

    scenario_ids: np.ndarray
    probability: np.ndarray
    per_scenario: dict[str, np.ndarray]
    expected: dict[str, float]
    per_hour: dict[str, np.ndarray]
    f1: float
    f2: float
    penalty: float
    z: float
    aens: float
    eir: float
    feasible: bool
    schedule: DispatchSchedule | None = None
    soc: dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self, case: NetworkCase | None = None) -> dict:
        out = {
            "z": self.z,
            "f1": self.f1,
            "f2": self.f2,
            "penalty": self.penalty,
            "aens_kwh": self.aens,
            "eir": self.eir,
            "feasible": self.feasible,
            "expected": dict(self.expected),
            "per_scenario": {"scenario_id": self.scenario_ids.tolist(),
                             "probability": self.probability.tolist(),
                             **{k: v.tolist() for k, v in self.per_scenario.items()}},
            "per_hour": {k: v.tolist() for k, v in self.per_hour.items()},
            "soc_kwh": {k: v.tolist() for k, v in self.soc.items()},
        }
        if self.schedule is not None and case is not None:
            out["schedule"] = self.schedule.to_dict(case)
        return out


class Evaluator:
    """Scores schedules against a fixed scenario set.

    Scenario-only quantities (loads, renewable output, reliability) are
    computed once; :meth:`z` then takes a population of genomes.
    """

    # rows of (candidate, scenario, hour) solved per load-flow call
    CHUNK_ROWS = 40_000

    def __init__(self, case: NetworkCase, scenarios: ScenarioSet, threads: int = 1,
                 tol: float = 1e-8, max_iter: int = 50):
        if scenarios.steps != case.horizon.steps:
            raise DimensionMismatch(
                f"scenario horizon {scenarios.steps} != case horizon {case.horizon.steps}"
            )
        self.case = case
        self.scenarios = scenarios
        self.threads = max(1, int(threads))
        self.tol = tol
        self.max_iter = max_iter
        self.chp_units = case.units("CHP")
        self.ess_units = case.units("ESS")
        self.n_units = len(self.chp_units) + len(self.ess_units)
        self.lower, self.upper = genome_bounds(case)
        steps, dt, pr = case.horizon.steps, case.horizon.dt, case.prices
        bidx = case.bus_index
        nb = len(case.buses)

        load_p, load_q = _scenario_loads(case, scenarios)
        self.load_p = load_p
        res = res_output(case, scenarios)
        self.res = res
        inj_p = -load_p.copy()
        inj_q = -load_q.copy()
        om_res = np.zeros(len(scenarios))
        em_res = np.zeros(len(scenarios))
        for u in _renewables(case):
            p = res[u.name]
            inj_p[:, :, bidx[u.bus]] += p
            inj_q[:, :, bidx[u.bus]] += p * u.q_ratio
            om_res += om_cost(p, u.om_rate, dt).sum(axis=1)
            em_res += emission_mass(p, u.emission.as_tuple()).sum(axis=1) * dt
        self.base_p, self.base_q = inj_p, inj_q
        self.om_res, self.em_res = om_res, em_res

        ctrl = self.chp_units + self.ess_units
        self.unit_bus = np.zeros((self.n_units, nb))
        for j, u in enumerate(ctrl):
            self.unit_bus[j, bidx[u.bus]] = 1.0
        self.unit_q = np.array([u.q_ratio for u in ctrl])
        self.price = np.asarray(pr.grid_energy_price)[None, :] * scenarios.price_mult  # (S, T)
        self.rel = reliability_cost(case, scenarios)
        self.f2_s = np.array([f2(case, c) for c in self.rel.c_aens])
        self._steps = steps

    # -- helpers ---------------------------------------------------------

    def _split(self, genomes: np.ndarray):
        g = genomes.reshape(genomes.shape[0], self._steps, self.n_units)
        nc = len(self.chp_units)
        return g, g[..., :nc], g[..., nc:]

    def _schedule_costs(self, chp: np.ndarray, ess: np.ndarray) -> dict[str, np.ndarray]:
        """Scenario-independent cost pieces, each of shape (K,)."""
        dt, pr = self.case.horizon.dt, self.case.prices
        k = chp.shape[0]
        fuel = np.zeros(k)
        fuel_units = np.zeros(k)
        om = np.zeros(k)
        em = np.zeros(k)
        for j, u in enumerate(self.chp_units):
            p = chp[..., j]
            fuel += chp_fuel_cost(p, u.params, pr, check=False).sum(axis=-1) * dt
            fuel_units += (u.params.theta * p * p + u.params.rho * p + u.params.gamma).sum(axis=-1) * dt
            om += om_cost(p, u.om_rate, dt).sum(axis=-1)
            em += emission_mass(p, u.emission.as_tuple()).sum(axis=-1) * dt
        for j, u in enumerate(self.ess_units):
            p = ess[..., j]
            om += om_cost(p, u.om_rate, dt).sum(axis=-1)
            em += emission_mass(np.abs(p), u.emission.as_tuple()).sum(axis=-1) * dt
        return {"fuel": fuel, "fuel_units": fuel_units, "om": om, "em": em,
                "sched_pen": schedule_penalty(self.case, chp, ess)}

    def _flows(self, g: np.ndarray) -> FlowSolution:
        """Load flow for genomes g (K, T, U) across all scenarios: arrays (K, S, T, ...)."""
        add_p = g @ self.unit_bus  # (K, T, B)
        add_q = (g * self.unit_q) @ self.unit_bus
        inj_p = self.base_p[None] + add_p[:, None]
        inj_q = self.base_q[None] + add_q[:, None]
        return solve_batch(self.case, inj_p, inj_q, tol=self.tol, max_iter=self.max_iter)

    def _network_terms(self, sol: FlowSolution) -> dict[str, np.ndarray]:
        dt = self.case.horizon.dt
        ok = sol.converged
        loss = np.where(ok, sol.total_loss_kw, 0.0)
        grid = np.where(ok, sol.slack_p_kw, 0.0)
        return {
            "loss_kwh": loss.sum(axis=-1) * dt,
            "grid_kwh": grid.sum(axis=-1) * dt,
            "grid_cost": (grid * self.price[None]).sum(axis=-1) * dt,
            "net_pen": network_penalty(self.case, sol.v, sol.slack_p_kw, ok),
        }

    def _chunk_z(self, genomes: np.ndarray) -> np.ndarray:
        pr = self.case.prices
        w = self.case.weights
        prob = self.scenarios.probability
        g, chp, ess = self._split(genomes)
        sc = self._schedule_costs(chp, ess)
        nt = self._network_terms(self._flows(g))
        f1_ks = (
            (sc["fuel"] + sc["om"] + sc["em"] * pr.emission_price)[:, None]
            + (self.om_res + self.em_res * pr.emission_price)[None]
            + nt["loss_kwh"] * pr.loss_price
            + nt["grid_cost"]
        )
        pen_ks = sc["sched_pen"][:, None] + nt["net_pen"]
        return w.h1 * (f1_ks @ prob) + w.h2 * float(self.f2_s @ prob) + pen_ks @ prob

    # -- public ------------------------------------------------------------

    def z(self, genomes) -> np.ndarray:
        """Objective for genomes of shape (K, d) (or a single (d,) vector)."""
        x = np.asarray(genomes, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.lower.size:
            raise DimensionMismatch(f"expected {self.lower.size} genes, got {x.shape[1]}")
        per = max(1, self.CHUNK_ROWS // max(1, len(self.scenarios) * self._steps))
        chunks = [x[i:i + per] for i in range(0, x.shape[0], per)]
        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(self._chunk_z, chunks))
        else:
            parts = [self._chunk_z(c) for c in chunks]
        out = np.concatenate(parts) if parts else np.zeros(0)
        return out[0] if single else out

    def __call__(self, genomes):
        return self.z(genomes)

    def report(self, schedule: DispatchSchedule) -> EvaluationReport:
        case = self.case
        _check_dims(case, schedule)
        pr, w, dt = case.prices, case.weights, case.horizon.dt
        prob = self.scenarios.probability
        x = schedule.to_vector()[None]
        g, chp, ess = self._split(x)
        sc = self._schedule_costs(chp, ess)
        sol = self._flows(g)
        nt = self._network_terms(sol)
        s_count = len(self.scenarios)

        def per_s(a):
            return np.broadcast_to(np.asarray(a, dtype=float), (s_count,)).copy()

        em_kg = per_s(sc["em"][0] + self.em_res)
        ps = {
            "fuel_cost": per_s(sc["fuel"][0]),
            "fuel_units": per_s(sc["fuel_units"][0]),
            "om_cost": per_s(sc["om"][0] + self.om_res),
            "emission_kg": em_kg,
            "emission_cost": em_kg * pr.emission_price,
            "loss_kwh": nt["loss_kwh"][0],
            "loss_cost": nt["loss_kwh"][0] * pr.loss_price,
            "grid_kwh": nt["grid_kwh"][0],
            "grid_cost": nt["grid_cost"][0],
            "ens_kwh": self.rel.ens.copy(),
            "c_aens": self.rel.c_aens.copy(),
            "penalty": per_s(sc["sched_pen"][0]) + nt["net_pen"][0],
        }
        ps["f1"] = ps["fuel_cost"] + ps["om_cost"] + ps["emission_cost"] + ps["loss_cost"] + ps["grid_cost"]
        ps["f2"] = self.f2_s.copy()
        expected = {k: float(prob @ v) for k, v in ps.items()}
        e_f1, e_f2, e_pen = expected["f1"], expected["f2"], expected["penalty"]
        z = w.h1 * e_f1 + w.h2 * e_f2 + e_pen

        conv = sol.converged[0]  # (S, T)
        v = np.where(conv[..., None], sol.v[0], np.nan)
        per_hour = {
            "grid_kw": prob @ np.where(conv, sol.slack_p_kw[0], 0.0),
            "loss_kw": prob @ np.where(conv, sol.total_loss_kw[0], 0.0),
            "v_min": np.nanmin(v, axis=(0, 2)),
            "v_max": np.nanmax(v, axis=(0, 2)),
            "v_min_expected": prob @ np.nanmin(v, axis=2),
            "load_kw": prob @ self.load_p.sum(axis=2),
        }
        for j, u in enumerate(self.chp_units):
            per_hour[u.name] = schedule.chp[:, j].copy()
        for j, u in enumerate(self.ess_units):
            per_hour[u.name] = schedule.ess[:, j].copy()
        for name, p in self.res.items():
            per_hour[name] = prob @ p
        soc = {u.name: soc_trajectory(schedule.ess[:, j], dt, u.params) for j, u in enumerate(self.ess_units)}
        feasible = bool(conv.all() and np.all(ps["penalty"] == 0.0))
        return EvaluationReport(
            scenario_ids=self.scenarios.ids.copy(),
            probability=prob.copy(),
            per_scenario=ps,
            expected=expected,
            per_hour=per_hour,
            f1=e_f1,
            f2=e_f2,
            penalty=e_pen,
            z=z,
            aens=self.rel.aens,
            eir=self.rel.eir,
            feasible=feasible,
            schedule=schedule,
            soc=soc,
        )


def evaluate_schedule(case: NetworkCase, schedule: DispatchSchedule, scenarios: ScenarioSet,
                      threads: int = 1) -> EvaluationReport:
    return Evaluator(case, scenarios, threads=threads).report(schedule)


def hourly_flows(case: NetworkCase, schedule: DispatchSchedule, scenario: Scenario) -> list[FlowSolution]:
    """Per-hour load flow of one scenario, for use with :func:`f1` and friends."""
    _check_dims(case, schedule)
    single = ScenarioSet(
        ids=np.array([scenario.id]),
        probability=np.array([1.0]),
        load_mult=np.asarray(scenario.load_mult)[None],
        wind_ms=np.asarray(scenario.wind_ms)[None],
        irradiance_wm2=np.asarray(scenario.irradiance_wm2)[None],
        price_mult=np.asarray(scenario.price_mult)[None],
    )
    ev = Evaluator(case, single)
    g = schedule.to_vector().reshape(1, case.horizon.steps, ev.n_units)
    sol = ev._flows(g)
    return [
        FlowSolution(
            v=sol.v[0, 0, t], p_flow=sol.p_flow[0, 0, t], q_flow=sol.q_flow[0, 0, t],
            p_send=sol.p_send[0, 0, t], loss_kw=sol.loss_kw[0, 0, t],
            total_loss_kw=sol.total_loss_kw[0, 0, t], slack_p_kw=sol.slack_p_kw[0, 0, t],
            slack_q_kvar=sol.slack_q_kvar[0, 0, t], converged=sol.converged[0, 0, t],
            collapsed=sol.collapsed[0, 0, t], iterations=sol.iterations,
        )
        for t in range(case.horizon.steps)
    ]


def expected_value(values: Iterable[float], probability) -> float:
    """Probability-weighted sum in fixed scenario order."""
    return float(np.dot(np.asarray(list(values), dtype=float), np.asarray(probability, dtype=float)))
