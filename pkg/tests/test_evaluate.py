import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import chain_doc
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import case_sweep, net_injections, spreadsheet_f1, tree_paths

from microdispatch.der import ChpParams
from microdispatch.errors import DimensionMismatch, EmissionOverflow, OutOfRange, UnknownBranch
from microdispatch.evaluate import (
    DispatchSchedule,
    Evaluator,
    branch_fault_partition,
    chp_fuel_cost,
    constraint_penalties,
    emission_mass,
    evaluate_schedule,
    expected_value,
    f1,
    f2,
    genome_bounds,
    hourly_flows,
    network_penalty,
    om_cost,
    reliability_cost,
    schedule_penalty,
)
from microdispatch.grid import PriceBook, Weights, case_from_dict
from microdispatch.uncertainty import ScenarioSet, forecast_scenario, generate_scenarios

CHP_DOC = {
    "name": "chp1", "kind": "CHP", "bus": 1, "p_min": 0.0, "p_max": 100.0, "om_rate": 0.01,
    "emission": {"alpha": 1.0, "beta": 0.1},
    "params": {"theta": 0.0, "rho": 0.2, "gamma": 0.0, "efficiency": 0.6},
}


def chp_only_case(load=50.0, steps=1, **prices):
    doc = chain_doc(n_bus=2, r=0.0, x=0.0, load=load, steps=steps, ders=[CHP_DOC])
    doc["buses"][1]["load_q_peak"] = 0.0
    doc["prices"].update(gas_price=0.3, emission_price=0.5, loss_price=0.1, **prices)
    return case_from_dict(doc)


def ess_case(**pen):
    ess = {"name": "ess1", "kind": "ESS", "bus": 1, "params": {
        "capacity": 100.0, "soc_min": 0.0, "soc_max": 50.0, "soc_init": 49.0,
        "p_ch_max": 10.0, "p_dis_max": 10.0, "eta_ch": 1.0, "eta_dis": 1.0}}
    doc = chain_doc(n_bus=2, ders=[ess])
    doc["penalties"] = {"rho_soc": 1000.0, "terminal_soc_band": None, **pen}
    return case_from_dict(doc)


def lv_schedule(case, chp_kw=60.0):
    steps = case.horizon.steps
    ess = np.where(np.arange(steps) < 8, -20.0, np.where(np.arange(steps) >= 18, 20.0, 0.0))
    return DispatchSchedule(chp=np.full((steps, 1), chp_kw), ess=ess[:, None])


# -- component costs -----------------------------------------------------------


def test_chp_fuel_cost_examples():
    chp = ChpParams(theta=0.0, rho=1.0, gamma=0.0, efficiency=0.6, p_max=200.0)
    assert chp_fuel_cost(0.0, chp, PriceBook((0.1,), gas_price=0.3)) == 0.0
    assert chp_fuel_cost(100.0, chp, PriceBook((0.1,), gas_price=0.3)) == pytest.approx(50.0, rel=1e-15)
    credit = ChpParams(theta=0.0, rho=1.0, gamma=0.0, efficiency=0.6, heat_to_electric=1.0, p_max=200.0)
    assert chp_fuel_cost(100.0, credit, PriceBook((0.1,), gas_price=0.3, heat_credit=0.1)) == pytest.approx(40.0)


def test_chp_fuel_cost_out_of_range():
    chp = ChpParams(theta=0.0, rho=1.0, gamma=0.0, efficiency=0.6, p_min=10.0, p_max=20.0)
    with pytest.raises(OutOfRange):
        chp_fuel_cost(25.0, chp, PriceBook((0.1,), gas_price=0.3))


def test_om_cost_examples():
    assert om_cost(100.0, 0.01, 1.0) == pytest.approx(1.0)
    assert om_cost(0.0, 0.01, 1.0) == 0.0
    assert om_cost(-50.0, 0.02, 1.0) == pytest.approx(1.0)


def test_emission_examples():
    assert emission_mass(40.0, (0, 0, 0, 0, 0)) == 0.0
    assert emission_mass(10.0, (1.0, 0.1, 0.0, 0.0, 0.0)) == pytest.approx(2.0)
    assert emission_mass(7.0, (0.0, 0.0, 0.0, 0.5, 0.0)) == 0.5
    with pytest.raises(EmissionOverflow):
        emission_mass(1000.0, (0.0, 0.0, 0.0, 1.0, 1.0))


# -- F1 -------------------------------------------------------------------------


def test_f1_zero_load_zero_dispatch():
    case = chp_only_case(load=0.0)
    s = forecast_scenario(case).scenarios[0]
    sched = DispatchSchedule.zeros(case)
    # alpha_e = 1 kg/h still applies for a unit that is online at 0 kW; drop it here
    case = replace(case, prices=replace(case.prices, emission_price=0.0))
    assert f1(case, sched, s, hourly_flows(case, sched, s)) == 0.0


def test_f1_chp_covers_load_lossless():
    case = chp_only_case(load=50.0)
    s = forecast_scenario(case).scenarios[0]
    sched = DispatchSchedule(chp=np.array([[50.0]]), ess=np.zeros((1, 0)))
    flows = hourly_flows(case, sched, s)
    assert float(flows[0].total_loss_kw) == 0.0
    assert abs(float(flows[0].slack_p_kw)) < 1e-12
    hand = 0.3 * 50 / 0.6 + 0.01 * 50 + (1 + 0.1 * 50) * 0.5  # 25 + 0.5 + 3
    assert hand == 28.5
    assert f1(case, sched, s, flows) == pytest.approx(hand, rel=1e-9)


def test_f1_matches_spreadsheet(lv):
    s = generate_scenarios(lv, 3, seed=4).scenarios[1]
    sched = lv_schedule(lv)
    chp = sched.chp.tolist()
    ess = sched.ess.tolist()
    inj = net_injections(lv, chp, ess, s.load_mult, s.wind_ms, s.irradiance_wm2)
    flows = []
    for p, q in inj:
        _, loss, slack, _ = case_sweep(lv, [-x for x in p], [-x for x in q])
        flows.append((loss, slack.real))
    expected = spreadsheet_f1(lv, chp, ess, s.load_mult, s.wind_ms, s.irradiance_wm2, s.price_mult, flows)
    got = f1(lv, sched, s, hourly_flows(lv, sched, s))
    assert got == pytest.approx(expected, rel=1e-6)
    rep = evaluate_schedule(lv, sched, ScenarioSet(
        ids=np.array([s.id]), probability=np.array([1.0]), load_mult=s.load_mult[None],
        wind_ms=s.wind_ms[None], irradiance_wm2=s.irradiance_wm2[None], price_mult=s.price_mult[None]))
    assert rep.f1 == pytest.approx(expected, rel=1e-6)


def test_dimension_mismatch(lv):
    bad = DispatchSchedule(chp=np.zeros((23, 1)), ess=np.zeros((23, 1)))
    with pytest.raises(DimensionMismatch):
        evaluate_schedule(lv, bad, forecast_scenario(lv))
    with pytest.raises(DimensionMismatch):
        DispatchSchedule.from_vector(lv, np.zeros(5))


def test_schedule_vector_round_trip(lv):
    sched = lv_schedule(lv)
    again = DispatchSchedule.from_vector(lv, sched.to_vector())
    assert np.array_equal(again.chp, sched.chp) and np.array_equal(again.ess, sched.ess)
    back = DispatchSchedule.from_dict(lv, sched.to_dict(lv))
    assert np.array_equal(back.ess, sched.ess)
    lo, hi = genome_bounds(lv)
    assert lo.size == hi.size == 48
    assert lo[:2].tolist() == [0.0, -40.0] and hi[:2].tolist() == [120.0, 40.0]


# -- fault partitions and reliability -------------------------------------------


def subtree_by_paths(case, branch):
    return frozenset(b for b, path in tree_paths(case).items() if branch in path)


def test_partition_two_bus(two_bus):
    assert branch_fault_partition(two_bus, 1) == (frozenset(), frozenset({1}))


def test_partition_trunk_of_four_bus_chain(chain):
    case = chain(n_bus=4)
    res, rep = branch_fault_partition(case, 1)
    assert res == frozenset()
    assert rep == {1, 2, 3} == subtree_by_paths(case, 1)


def test_partition_missing_sectionalizer_grows():
    doc = chain_doc(n_bus=4)
    doc["branches"][2]["has_sectionalizer"] = False
    case = case_from_dict(doc)
    _, rep = branch_fault_partition(case, 3)
    assert rep == {2, 3} == subtree_by_paths(case, 2)
    doc["branches"][1]["has_sectionalizer"] = False
    doc["branches"][0]["has_sectionalizer"] = False
    _, rep = branch_fault_partition(case_from_dict(doc), 3)
    assert rep == {1, 2, 3}


def test_partition_unknown_branch(two_bus):
    with pytest.raises(UnknownBranch):
        branch_fault_partition(two_bus, 42)


def test_partition_ieee69_matches_enumeration(ieee69):
    for br in ieee69.branches:
        _, rep = branch_fault_partition(ieee69, br.id)
        assert rep == subtree_by_paths(ieee69, br.id)


def reliability_case(h_c=1.0, price=5.0, rate=0.1):
    doc = chain_doc(n_bus=2, load=100.0, failure_rate=rate, steps=24)
    doc["reliability"] = {"t_res": 0.0, "t_rep": 4.0}
    doc["prices"]["interruption_price"] = price
    doc["weights"]["h_c"] = h_c
    return case_from_dict(doc)


def test_reliability_daily_cost():
    case = reliability_case()
    rel = reliability_cost(case, forecast_scenario(case))
    assert rel.c_aens[0] == pytest.approx(0.1 * 100 * 4 * 5 / 365, rel=1e-12)
    assert round(float(rel.c_aens[0]), 3) == 0.548
    assert rel.ens[0] == pytest.approx(0.1 * 100 * 4 / 365, rel=1e-12)
    assert rel.eir == pytest.approx(1 - rel.aens / 2400.0, rel=1e-12)
    assert 0.0 <= rel.eir <= 1.0


def test_f2_examples():
    case = reliability_case(h_c=2.0)
    assert f2(case, 0.548) == pytest.approx(1.096, abs=1e-12)
    assert f2(reliability_case(h_c=1.0), 0.548) == 0.548
    assert f2(reliability_case(h_c=0.0), 0.548) == 0.0
    # several microgrids sum
    assert f2(case, [0.5, 0.25]) == pytest.approx(1.5)


def test_no_failures_means_no_reliability_cost(lv):
    case = replace(lv, branches=tuple(replace(b, failure_rate=0.0) for b in lv.branches))
    s = generate_scenarios(case, 5, seed=0)
    rel = reliability_cost(case, s)
    assert np.all(rel.c_aens == 0.0)
    assert rel.eir == 1.0
    rep = evaluate_schedule(case, lv_schedule(case), s)
    assert rep.f2 == 0.0
    assert rep.z == pytest.approx(case.weights.h1 * rep.f1 + rep.penalty, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 10.0))
def test_interruption_price_scales_linearly(scale):
    base = reliability_case(price=5.0)
    scaled = reliability_case(price=5.0 * scale)
    s = forecast_scenario(base)
    a = reliability_cost(base, s).c_aens
    b = reliability_cost(scaled, s).c_aens
    assert b[0] == pytest.approx(scale * a[0], rel=1e-12, abs=1e-300)
    assert f2(scaled, b) == pytest.approx(scale * f2(base, a), rel=1e-12, abs=1e-300)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.1, 3.0))
def test_eir_bounded(rate, mult):
    case = reliability_case(rate=rate)
    s = forecast_scenario(case)
    s = replace(s, load_mult=s.load_mult * mult)
    rel = reliability_cost(case, s)
    assert rel.aens <= rel.demand_kwh
    assert 0.0 <= rel.eir <= 1.0


# -- penalties -------------------------------------------------------------------


def test_feasible_schedule_no_penalty():
    case = ess_case()
    sched = DispatchSchedule(chp=np.zeros((1, 0)), ess=np.array([[0.0]]))
    assert schedule_penalty(case, sched.chp, sched.ess) == 0.0


def test_soc_penalty_example():
    case = ess_case()
    # charge 2 kW for 1 h from 49 kWh at unit efficiency: 51 kWh, 1 over soc_max
    pen = schedule_penalty(case, np.zeros((1, 0)), np.array([[-2.0]]))
    assert pen == pytest.approx(1000.0, rel=1e-12)


def test_terminal_band_penalty():
    case = ess_case(terminal_soc_band=0.05)
    # discharge 10 kWh: terminal SOC 39, 10 from initial, band 5 -> 5^2 * 1000
    pen = schedule_penalty(case, np.zeros((1, 0)), np.array([[10.0]]))
    assert pen == pytest.approx(25_000.0)


def test_divergence_penalty_constant(two_bus):
    v = np.ones((3, 2))
    pen = network_penalty(two_bus, v, np.zeros(3), np.array([True, False, True]))
    assert pen == 1e9


def test_voltage_and_tie_penalties(two_bus):
    case = replace(two_bus, tie=replace(two_bus.tie, limit_kw=100.0))
    v = np.array([[1.0, 0.94]])
    pen = network_penalty(case, v, np.array([103.0]), np.array([True]))
    assert pen == pytest.approx(1e4 * 0.01**2 + 1e4 * 3.0**2)


def test_unit_limit_penalty(lv):
    steps = lv.horizon.steps
    sched = DispatchSchedule(chp=np.full((steps, 1), 60.0), ess=np.zeros((steps, 1)))
    sched.chp[3, 0] = 125.0
    pen = schedule_penalty(lv, sched.chp, sched.ess)
    assert pen == pytest.approx(1e4 * 25.0)


def test_penalty_paths_agree(lv):
    s = generate_scenarios(lv, 4, seed=2)
    sched = lv_schedule(lv, chp_kw=10.0)
    rep = evaluate_schedule(lv, sched, s)
    for i, sc in enumerate(s.scenarios):
        pen = constraint_penalties(lv, sched, sc, hourly_flows(lv, sched, sc))
        assert rep.per_scenario["penalty"][i] == pytest.approx(pen, rel=1e-9)


# -- aggregation -------------------------------------------------------------------


def test_report_expectations_are_linear(lv):
    s = generate_scenarios(lv, 12, seed=3)
    s = replace(s, probability=np.linspace(1, 3, 12) / np.linspace(1, 3, 12).sum())
    rep = evaluate_schedule(lv, lv_schedule(lv), s)
    for key, vals in rep.per_scenario.items():
        manual = sum(p * v for p, v in zip(s.probability, vals))
        assert rep.expected[key] == pytest.approx(manual, rel=1e-9, abs=1e-12)
    w = lv.weights
    assert rep.z == pytest.approx(w.h1 * rep.f1 + w.h2 * rep.f2 + rep.penalty, rel=1e-12)
    assert rep.f1 == pytest.approx(expected_value(rep.per_scenario["f1"], s.probability), rel=1e-12)


def test_scalar_and_batched_paths_agree(lv):
    s = generate_scenarios(lv, 5, seed=8)
    sched = lv_schedule(lv)
    rep = evaluate_schedule(lv, sched, s)
    for i, sc in enumerate(s.scenarios):
        assert rep.per_scenario["f1"][i] == pytest.approx(f1(lv, sched, sc, hourly_flows(lv, sched, sc)), rel=1e-9)
    ev = Evaluator(lv, s)
    assert ev.z(sched.to_vector()) == pytest.approx(rep.z, rel=1e-12)
    batch = ev.z(np.stack([sched.to_vector(), lv_schedule(lv, 30.0).to_vector()]))
    assert batch[0] == pytest.approx(rep.z, rel=1e-12)
    assert batch[1] == pytest.approx(evaluate_schedule(lv, lv_schedule(lv, 30.0), s).z, rel=1e-12)


def test_threads_do_not_change_results(lv):
    s = generate_scenarios(lv, 6, seed=1)
    rng = np.random.default_rng(0)
    lo, hi = genome_bounds(lv)
    pop = rng.uniform(lo, hi, size=(30, lo.size))
    one = Evaluator(lv, s, threads=1)
    one.CHUNK_ROWS = 6 * 24 * 4
    many = Evaluator(lv, s, threads=3)
    many.CHUNK_ROWS = 6 * 24 * 4
    assert np.array_equal(one.z(pop), many.z(pop))


def test_duplicated_scenarios_same_z(lv):
    s = generate_scenarios(lv, 6, seed=5)
    idx = np.repeat(np.arange(6), 2)
    dup = s.subset(idx, probability=np.repeat(s.probability / 2, 2))
    sched = lv_schedule(lv)
    assert evaluate_schedule(lv, sched, dup).z == pytest.approx(evaluate_schedule(lv, sched, s).z, rel=1e-12)


def test_weight_degeneracy(lv):
    s = generate_scenarios(lv, 4, seed=0)
    sched = lv_schedule(lv)
    full = evaluate_schedule(lv, sched, s)
    no_rel = evaluate_schedule(replace(lv, weights=Weights(h1=1.0, h2=0.0)), sched, s)
    no_cost = evaluate_schedule(replace(lv, weights=Weights(h1=0.0, h2=1.0)), sched, s)
    assert full.f2 > 0
    assert no_rel.z == no_rel.f1 + no_rel.penalty
    assert no_cost.z == no_cost.f2 + no_cost.penalty


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_z_monotone_in_weights(h1, h2, extra):
    case = chp_only_case(load=50.0)
    case = replace(case, branches=tuple(replace(b, failure_rate=0.2) for b in case.branches))
    s = forecast_scenario(case)
    sched = DispatchSchedule(chp=np.array([[40.0]]), ess=np.zeros((1, 0)))
    a = evaluate_schedule(replace(case, weights=Weights(h1=h1, h2=h2)), sched, s)
    b = evaluate_schedule(replace(case, weights=Weights(h1=h1 + extra, h2=h2)), sched, s)
    c = evaluate_schedule(replace(case, weights=Weights(h1=h1, h2=h2 + extra)), sched, s)
    assert a.f1 >= 0 and a.f2 >= 0
    assert b.z >= a.z and c.z >= a.z


def test_report_fields(lv):
    s = generate_scenarios(lv, 3, seed=0)
    rep = evaluate_schedule(lv, lv_schedule(lv), s)
    d = rep.to_dict(lv)
    assert set(d) >= {"z", "f1", "f2", "penalty", "eir", "per_scenario", "per_hour", "schedule"}
    assert len(rep.per_hour["v_min"]) == 24
    assert np.all(rep.per_hour["v_min"] <= rep.per_hour["v_max"])
    assert rep.soc["ess1"].shape == (24,)
    assert math.isfinite(rep.z)
