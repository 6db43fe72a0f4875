from safmodel.scenario import *
from safmodel.cases import HeatPairCase, TwoRouteCase
from safmodel.config import from_dict
from safmodel.core_model import ComponentSpec, SuperstructureSpec
from safmodel.oracles import generate_dataset
from safmodel.trainer import TrainConfig, train_relu_net

import csv
import json
import math

import numpy as np
import pytest


def product_spec():
    comps = [ComponentSpec("KERO", 170.0, 12.0, tags=frozenset(["hydrocarbon", "kerosene"]), combustion_co2=3.0),
             ComponentSpec("NAPH", 100.0, 12.0, tags=frozenset(["hydrocarbon"]), combustion_co2=3.1),
             ComponentSpec("CO", 28.01)]
    return SuperstructureSpec(comps, [], [])


@pytest.fixture(scope="module")
def two_route():
    return load_config("two_route")


def test_abatement_cost():
    assert abatement_cost(4040.0, 790.0, 6.69) == pytest.approx(485.8, abs=0.05)
    assert abatement_cost(2430.0, 790.0, 4.2) == pytest.approx(390.5, abs=0.05)
    assert abatement_cost(790.0, 790.0, 3.0) == 0.0
    assert abatement_cost(1000.0, 790.0, 0.0) is UNDEFINED
    assert abatement_cost(1000.0, 790.0, -1.0) is UNDEFINED


def test_kerosene_only():
    spec = product_spec()
    k = kerosene_metrics(spec, {"KERO": 1.0}, {"KERO": 1.0}, 10.0, 1e6, 2e5)
    assert k.allocation == 1.0
    assert k.lambda_kerosene == 3.0
    assert k.cost_kerosene == 1e6
    assert k.mass_kerosene == pytest.approx(87600.0)


def test_kerosene_half():
    spec = product_spec()
    tau = spec.globals["tau"]
    w = {"KERO": 0.5, "NAPH": 0.5}
    k = kerosene_metrics(spec, w, w, 10.0, 1e6, 2e5, purge_co=0.1)
    assert k.allocation == pytest.approx(0.5)
    assert k.cost_kerosene == pytest.approx(5e5)
    assert k.mass_kerosene == pytest.approx(tau * 5.0)
    expected = 0.5 * 2e5 + tau * 1.5 * 10.0 + tau * 0.5 * CO_FACTOR * 0.1
    assert k.emissions_kerosene == pytest.approx(expected)
    assert k.specific_cost == pytest.approx(5e5 / (tau * 5.0))


def test_kerosene_without_hydrocarbons(caplog):
    k = kerosene_metrics(product_spec(), {"CO": 1.0}, {"CO": 1.0}, 10.0, 1e6, 2e5)
    assert k.allocation is UNDEFINED
    assert k.specific_cost is UNDEFINED
    assert "allocation undefined" in caplog.text


def test_point_abatement():
    point = ParetoPoint(None, 1.0, 1.0, 4.04, 4.47 - 6.69, [], {}, OPTIMAL, 0.0, None)
    assert point_abatement(point, {"cost_per_kg": 0.79, "emission_per_kg": 4.47}) == pytest.approx(485.8, abs=0.05)
    assert point_abatement(point, None) is UNDEFINED


def test_load_config(two_route):
    assert two_route.name == "two-route"
    assert two_route.co2_caps == (math.inf, 1e6, 1e5)
    assert two_route.solver.rel_gap == 1e-6
    assert two_route.reference["cost_per_kg"] == 0.79


def test_unknown_case():
    with pytest.raises(ConfigError):
        from_scenario(from_dict({"scenario": {"case": "nope"}}))


def test_unknown_process_param():
    scenario = from_dict({"scenario": {"case": "electrolysis"}, "process_params": {"AEC": {"voltage": 2.0}}})
    with pytest.raises(ConfigError) as exc:
        from_scenario(scenario)
    assert exc.value.key == "process_params.AEC.voltage"


def test_inline_superstructure():
    data = {"scenario": {"name": "inline"},
            "superstructure": {
                "components": [{"id": "A", "molar_mass": 10.0, "src_cost": 1.0, "src_emission": 0.0,
                                "tags": ["source"]},
                               {"id": "B", "molar_mass": 10.0}],
                "processes": [{"id": "P", "stoich": {"A": -1.0, "B": 1.0}, "key_component": "B",
                               "specific_capex": 0.0,
                               "inlet_ports": [{"index": 1, "allowed": ["A"]}],
                               "outlet_ports": [{"index": 1, "allowed": ["B"]}]}]},
            "globals": {"targets": [["P", 1, 5.0]]}}
    cfg = from_scenario(from_dict(data))
    model, sol = solve(cfg)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(cfg.spec.globals["tau"] * 5.0, rel=1e-6)


def test_pareto_two_route(two_route):
    """Cost optimum, a blended point, then an infeasible cap"""
    c = TwoRouteCase()
    points = pareto_sweep(two_route)
    assert [p.cap for p in points] == [math.inf, 1e6, 1e5]
    assert points[0].status == OPTIMAL
    assert points[0].objective == pytest.approx(c.expects()["objective"], rel=1e-5)
    assert points[1].status == OPTIMAL
    cost_e, e_e = c.route(c.fossil)
    cost_c, e_c = c.route(c.bio)
    share = (1e6 - e_c) / (e_e - e_c)
    assert points[1].objective == pytest.approx(share * cost_e + (1.0 - share) * cost_c, rel=1e-5)
    assert points[1].emissions <= 1e6 * (1.0 + 1e-6)
    assert points[0].objective <= points[1].objective
    assert points[2].status == INFEASIBLE
    assert points[2].objective is None
    assert infeasible(points)


def test_default_caps(two_route):
    c = TwoRouteCase()
    caps = default_caps(two_route, 3)
    assert len(caps) == 3
    assert caps[0] == pytest.approx(c.expects()["emissions_max"], rel=1e-5)
    assert caps[-1] == pytest.approx(c.expects()["emissions_min"], rel=1e-5)
    assert caps[1] - caps[2] < caps[0] - caps[1]


def test_points_csv(tmp_path, two_route):
    points = pareto_sweep(two_route)
    path = str(tmp_path / "pareto.csv")
    write_points_csv(points, path, two_route)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 4
    assert rows[3][CSV_COLUMNS.index("status")] == INFEASIBLE
    assert rows[3][CSV_COLUMNS.index("objective")] == ""
    assert rows[1][CSV_COLUMNS.index("digest")] == two_route.digest


def test_specific_cost(two_route):
    model, sol = solve(two_route)
    point = evaluate_point(two_route, model, sol)
    mass = two_route.spec.globals["tau"] * TwoRouteCase.target
    assert point.specific_cost == pytest.approx(sol.objective / mass)
    assert "Dirty" in point.active


def test_price_sweep():
    cfg = load_config("toy")
    results = price_sweep(cfg, "gamma_el", [0.05, 0.1])
    assert [v for v, _ in results] == [0.05, 0.1]
    assert results[0][1].objective < results[1][1].objective
    with pytest.raises(ConfigError):
        price_sweep(cfg, "gamma_unobtainium", [1.0])


def test_compare_fixed_adaptable():
    """Without surrogate inputs to freeze both designs cost the same"""
    cfg = load_config("toy")
    rows = compare_fixed_adaptable(cfg, [0.05, 0.1], 0.05)
    assert [r["price"] for r in rows] == [0.05, 0.1]
    for r in rows:
        assert r["fixed"].objective == pytest.approx(r["adaptable"].objective, rel=1e-6)
    assert rows[0]["adaptable"].objective < rows[1]["adaptable"].objective


def test_heat_integration_sensitivity():
    cfg = from_scenario(from_dict({"scenario": {"case": "heat-pair"}, "solver": {"rel_gap": 1e-7}}))
    c = HeatPairCase()
    tau = c.spec.globals["tau"]
    feed = tau * c.feed_cost * c.target
    for row in heat_integration_sensitivity(cfg, [0.01, 0.05]):
        assert row["integrated"].objective == pytest.approx(feed, rel=1e-5)
        heat = tau * row["price"] * -c.cold_duty * c.target
        assert row["standalone"].objective == pytest.approx(feed + heat, rel=1e-5)


def test_cost_breakdown():
    cfg = load_config("toy")
    model, sol = solve(cfg)
    breakdown = cost_breakdown(sol.values, model, cfg.spec)
    parts = sum(breakdown["capex"].values()) + sum(breakdown["components"].values()) \
        + breakdown["electricity"] + breakdown["heat"]
    assert parts == pytest.approx(breakdown["total"], rel=1e-6)
    flows = source_flows(sol.values, model, cfg.spec)
    assert flows["sources"]["H2O"]["mass"] > 0.0


def test_write_json(tmp_path):
    cfg = load_config("toy")
    path = str(tmp_path / "out.json")
    write_json({"cap": math.inf, "values": [np.float64(1.5)]}, path, cfg)
    with open(path) as f:
        data = json.load(f)
    assert data["scenario"] == "toy"
    assert data["digest"] == cfg.digest
    assert data["cap"] == "inf"
    assert data["values"] == [1.5]


def test_plot_data(two_route):
    series = plot_data(pareto_sweep(two_route))
    assert len(series["cap"]["x"]) == 2
    assert series["cap"]["x"][0] == "inf"


@pytest.fixture(scope="module")
def desk():
    """Desk scenario with networks trained on small oracle samples"""
    networks = {}
    for name, width in (("gasifier", 24), ("rwgs", 16), ("ft", 24)):
        data = generate_dataset(name, 400, seed=7)
        networks[name] = train_relu_net(data, TrainConfig(hidden_width=width, epochs=300, seed=7)).net
    return from_scenario(load_scenario("ftsaf_desk"), networks)


def check_desk_solution(cfg, model, sol):
    spec = cfg.spec
    F = spec.globals["flow_cap"]
    dt = spec.globals["dt_min"]
    diff = []
    if not has_values(sol):
        pytest.fail("Check failed\nno solution, status {}".format(sol.status))
    x = sol.values
    for process in spec.processes:
        j = process.id
        y = model.value(x, ("y", j))
        m_in = sum(model.value(x, ("Min", j, p.index)) for p in process.inlet_ports)
        m_out = sum(model.value(x, ("Mout", j, p.index)) for p in process.outlet_ports)
        if process.inlet_ports and process.outlet_ports and abs(m_in - m_out) > 1e-6 * F:
            diff.append("{}: inlet {} outlet {}".format(j, m_in, m_out))
        for direction, ports in (("w_in", process.inlet_ports), ("w_out", process.outlet_ports)):
            for p in ports:
                total = sum(model.get(x, (direction, a, j, p.index)) for a in spec.component_ids)
                if abs(total - y) > 1e-6:
                    diff.append("{} {} {}: fractions sum to {}, y = {}".format(direction, j, p.index, total, y))

    def temperature(pid, port):
        if port.temperature_input is None:
            return port.temperature
        return model.value(x, ("ann_in", pid, port.temperature_input))

    for hid, hport in spec.hot_ports():
        for cid, cport in spec.cold_ports():
            key = (hid, hport.index, cid, cport.index)
            if model.get(x, ("z_heat",) + key) > 0.5:
                approach = temperature(hid, hport) - temperature(cid, cport)
                if approach < dt - 1e-6 * max(1.0, abs(approach)):
                    diff.append("heat {}: approach {} below {}".format(key, approach, dt))
    if len(diff) > 0:
        msg = "Check failed\n{}".format("\n  ".join(diff))
        pytest.fail(msg)


@pytest.mark.slow
def test_desk_solution(desk):
    model, sol = solve(desk)
    assert sol.status in (OPTIMAL, FEASIBLE)
    assert sol.report.passed
    check_desk_solution(desk, model, sol)


@pytest.mark.slow
def test_desk_pareto(desk):
    """Tighter caps never cost less than the looser point's proven bound"""
    caps = default_caps(desk, 4)
    points = pareto_sweep(desk, caps)
    assert len(points) == len(caps)
    solved = [p for p in points if p.objective is not None]
    assert len(solved) >= 2
    for p in solved:
        assert p.emissions <= p.cap * (1.0 + 1e-6) + 1e-6
    for loose, tight in zip(solved, solved[1:]):
        assert loose.cap >= tight.cap
        slack = loose.gap * abs(loose.objective) + 1e-6 * max(1.0, abs(loose.objective))
        assert tight.objective >= loose.objective - slack


@pytest.mark.slow
def test_desk_fixed_adaptable(desk):
    """Free operating variables never cost more than the design frozen at the reference price"""
    rows = compare_fixed_adaptable(desk, [0.0, 0.1, 0.2], 0.1)
    assert len(rows) == 3
    for r in rows:
        a, f = r["adaptable"], r["fixed"]
        assert a.objective is not None and f.objective is not None
        slack = a.gap * abs(a.objective) + f.gap * abs(f.objective) + 1e-6 * max(1.0, abs(f.objective))
        assert a.objective <= f.objective + slack
