from safmodel.algebra import *
from safmodel.cases import ChainCase, ElectrolysisCase, HeatPairCase, VentCase
from safmodel.core_model import (COLD, DUAL, FLOW_BASIS, INLET, OUTLET, ComponentSpec, HeatPortSpec, Linear,
                                 PortSpec, ProcessSpec, SuperstructureSpec)
from safmodel.solver import OPTIMAL, SolverOptions, solve_miqcp, verify_solution

import pytest

OPTS = SolverOptions(rel_gap=1e-7, abs_gap=1e-7)


def check_solution(model: ModelIR, sol, check: dict):
    diff = []
    if sol.status != OPTIMAL:
        diff.append("status mismatch: expected {}, got {}".format(OPTIMAL, sol.status))
    for key, value in check.items():
        if not isinstance(key, tuple):
            continue
        got = model.value(sol.values, key)
        if got != pytest.approx(value, rel=1e-5, abs=1e-6):
            diff.append("{} mismatch: expected {}, got {}".format(format_label(key), value, got))
    if "objective" in check and sol.objective != pytest.approx(check["objective"], rel=1e-5):
        diff.append("objective mismatch: expected {}, got {}".format(check["objective"], sol.objective))
    if len(diff) > 0:
        msg = "Check failed\n{}".format("\n  ".join(diff))
        pytest.fail(msg)


def one_process(components=("A", "B")):
    comps = [ComponentSpec(c, 10.0, src_cost=1.0, src_emission=0.0, tags=frozenset(["source"]))
             for c in components]
    p = ProcessSpec("P", Linear({}, None, 0.0, 0.0, FLOW_BASIS),
                    inlet_ports=[PortSpec("P", INLET, 1)], outlet_ports=[PortSpec("P", OUTLET, 1)])
    return SuperstructureSpec(comps, [p], [])


def test_capital_recovery():
    assert capital_recovery(0.07, 20.0) == pytest.approx(0.09439, abs=1e-5)


def test_mass_balance_counts():
    m = emit_mass_balances(one_process())
    assert m.count("inlet_total") == 1
    assert m.count("inlet_partial") == 2
    assert m.count("outlet_total") == 1
    assert m.count("outlet_partial") == 2
    assert m.count("process_conservation") == 1
    assert m.count("splitter") == 0


def test_mass_balance_chain_counts():
    m = emit_mass_balances(ChainCase().spec)
    assert m.count("splitter") == 3
    assert len([c for c in m.constraints("sink_composition") if c.name[2:] == ("P1", 1)]) == 3
    assert len([c for c in m.constraints("sink_composition") if c.name[2:] == ("P2", 1)]) == 3


def test_conversion_missing_key():
    spec = ElectrolysisCase().spec
    aec = spec.process("AEC")
    spec = spec.replace(processes=[aec._replace(kind=aec.kind._replace(key_component=None))])
    with pytest.raises(ModelConstructionError):
        emit_conversion_and_scale(spec)


def test_conversion_rows():
    spec = ElectrolysisCase().spec
    m = emit_conversion_and_scale(spec)
    assert m.count("conversion") == 3
    assert m.count("scale") == 1
    row = m.constraints("scale")[0]
    assert sorted(row.coeffs.values()) == [-1.0, 1.0]


def test_electrolysis():
    """Water, power and scale of the single electrolyzer"""
    c = ElectrolysisCase()
    model = assemble_model(c.spec)
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, c.expects())
    assert verify_solution(model, sol.values).passed


def test_chain():
    c = ChainCase()
    model = assemble_model(c.spec)
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, c.expects())


@pytest.mark.parametrize("species", ["CO", "CH4", "CO2"])
def test_vent_oxidation(species):
    """Carbon leaving through a sink counts as CO2 after complete oxidation"""
    c = VentCase(species=species)
    model = assemble_model(c.spec)
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, c.expects())


def test_vent_factors():
    tau = ElectrolysisCase().spec.globals["tau"]
    assert VentCase(species="CO").expects()[("M_CO2_sink",)] == pytest.approx(tau * 1.571)
    assert VentCase(species="CH4").expects()[("M_CO2_sink",)] == pytest.approx(tau * 2.743)


def test_electricity_opex_coefficient():
    spec = ElectrolysisCase(electricity_price=0.1).spec
    m = emit_economics(spec)
    row = m.constraints("opex_electricity")[0]
    assert row.coeffs[m.var(("Wsrc",)).id] == pytest.approx(-876.0)
    assert m.metadata["capital_recovery"] == pytest.approx(0.09439, abs=1e-5)


def test_heat_pair():
    c = HeatPairCase()
    model = assemble_model(c.spec)
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, {"objective": c.expects()["objective"]})


def test_heat_pair_without_integration():
    c = HeatPairCase()
    model = assemble_model(c.spec, heat_integration=False)
    assert model.count("heat_integration_off") == 1
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, {"objective": c.expects()["objective_without_integration"]})


def test_heat_pair_approach_violated():
    """Source at 100, sink at 95: no heat can flow"""
    c = HeatPairCase(hot_temperature=100.0, cold_temperature=95.0)
    model = assemble_model(c.spec)
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, {("Qflow", "Hot", 1, "Cold", 1): 0.0,
                                ("z_heat", "Hot", 1, "Cold", 1): 0.0,
                                "objective": c.expects()["objective"]})


def test_dual_port_wrong_process():
    spec = HeatPairCase().spec
    cold = spec.process("Cold")
    cold = cold._replace(heat_ports=[HeatPortSpec("Cold", 1, DUAL, 100.0, specific_duty=-1.0)])
    spec = spec.replace(processes=[spec.process("Hot"), cold])
    with pytest.raises(ModelConstructionError):
        emit_heat_integration(spec)


def test_empty_spec():
    model = assemble_model(SuperstructureSpec())
    assert len(model) == 0
    assert model.lin_constraints == []


def test_invalid_spec_rejected():
    spec = ChainCase().spec.replace(connections=[("P1", 9, "P2", 1)])
    with pytest.raises(ModelConstructionError):
        assemble_model(spec)


def test_bilinear_classification():
    m = ModelIR()
    x = m.add_var(("x",), CONTINUOUS, 0.0, 2.0)
    y = m.add_var(("y",), BINARY)
    f = m.add_var(("f",), CONTINUOUS, 0.0, 2.0)
    z1 = m.add_var(("z1",), CONTINUOUS, 0.0, 4.0)
    z2 = m.add_var(("z2",), CONTINUOUS, 0.0, 2.0)
    assert m.add_bilinear(z1, x, f).exactness == MCCORMICK
    assert m.add_bilinear(z2, y, f).exactness == EXACT_BINARY


def test_assembled_bilinears_bounded():
    model = assemble_model(HeatPairCase().spec)
    assert len(model.bilinears) > 0
    for t in model.bilinears:
        assert t.exactness in (EXACT_BINARY, MCCORMICK)
        for v in (t.factor_a, t.factor_b):
            assert v.lo > -INF and v.hi < INF, format_label(v.label)


def test_shared_labels_merge():
    a = ModelIR()
    a.add_var(("v",), CONTINUOUS, 0.0, 10.0)
    b = ModelIR()
    b.add_constraint([(("v",), 1.0)], LE, 5.0, ("cap",))
    assert b.var(("v",)).lo == -INF
    a.merge(b)
    assert len(a) == 1
    assert a.var(("v",)).lo == 0.0
    assert a.var(("v",)).hi == 10.0


def test_format_label():
    assert format_label(("w_in", "H2", "AEC", 1)) == "w_in(H2,AEC,1)"
    assert format_label(("Wsrc",)) == "Wsrc"


def test_co2_total_zero():
    """No flows, no power, no heat: nothing is emitted"""
    spec = one_process()
    model = assemble_model(spec)
    sol = solve_miqcp(model, OPTS)
    check_solution(model, sol, {("M_CO2_tot",): 0.0, "objective": 0.0})
