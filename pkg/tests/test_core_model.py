from safmodel.core_model import *
from safmodel.cases import ChainCase, ElectrolysisCase, FtSafCase
from safmodel.cases.ftsaf import FOUR_LUMP, lumped, carbon_number
from safmodel.oracles import HYDROCARBONS

import pytest


def check_spec(spec: SuperstructureSpec, check: dict):
    diff = []
    for key, value in check.items():
        if key == "components" and len(spec.components) != value:
            diff.append("components mismatch: expected {}, got {}".format(value, len(spec.components)))
        elif key == "processes" and len(spec.processes) != value:
            diff.append("processes mismatch: expected {}, got {}".format(value, len(spec.processes)))
    if len(diff) > 0:
        msg = "Check failed\n{}".format("\n  ".join(diff))
        pytest.fail(msg)


def kero_lumping(spec):
    lumping = {c: c for c in spec.tagged("hydrocarbon")}
    for c in spec.tagged("kerosene"):
        lumping[c] = "KERO_LUMP"
    groups = {"KERO_LUMP": {"molar_mass": 170.3, "lhv": 12.25, "tags": ["hydrocarbon", "kerosene"]}}
    return lumping, groups


def test_validate_minimal():
    spec = ElectrolysisCase().spec
    report = validate_superstructure(spec)
    assert report.ok, str(report)


def test_validate_ftsaf():
    """The full superstructure with 11 processes and 47 components is buildable"""
    c = FtSafCase()
    report = validate_superstructure(c.spec)
    assert report.ok, str(report)
    check_spec(c.spec, c.expects())


def test_validate_dangling_port():
    spec = ChainCase().spec
    spec = spec.replace(connections=[("P1", 9, "P2", 1)])
    report = validate_superstructure(spec)
    assert "dangling port" in report.kinds()


def test_validate_duplicate_process():
    spec = ElectrolysisCase().spec
    spec = spec.replace(processes=spec.processes * 2)
    assert "duplicate id" in validate_superstructure(spec).kinds()


def test_validate_missing_key_component():
    spec = ElectrolysisCase().spec
    aec = spec.process("AEC")
    spec = spec.replace(processes=[aec._replace(kind=aec.kind._replace(key_component=None))])
    assert "missing key component" in validate_superstructure(spec).kinds()


def test_validate_never_raises_on_globals():
    spec = ElectrolysisCase().spec.with_globals(tau=-1.0)
    assert not validate_superstructure(spec).ok


def test_lump_identity():
    spec = FtSafCase().spec
    same = lump_components(spec, {c: c for c in spec.tagged("hydrocarbon")})
    assert same == spec


def test_lump_kerosene():
    """Nine kerosene alkanes into one group"""
    spec = FtSafCase().spec
    lumping, groups = kero_lumping(spec)
    out = lump_components(spec, lumping, groups)
    check_spec(out, {"components": 47 - 9 + 1})
    assert out.has_component("KERO_LUMP")
    assert not out.has_component("C12H26")
    assert validate_superstructure(out).ok


def test_lump_four():
    c = FtSafCase()
    out = lumped(c.spec, "four-lump")
    check_spec(out, {"components": c.expects()["lumped_components"]})
    assert sorted(out.tagged("hydrocarbon")) == ["GAS", "HEAVY", "KERO", "NAPHTHA"]
    kero = [b for b in out.process("FT").kind.output_bindings if b.quantity == ("w_out", 1, "KERO")]
    assert len(kero) == 9


def test_lump_four_groups():
    assert FOUR_LUMP["CH4"] == "GAS"
    assert FOUR_LUMP["C7H16"] == "NAPHTHA"
    assert FOUR_LUMP["C16H34"] == "KERO"
    assert FOUR_LUMP["C30PLUS"] == "HEAVY"
    assert sum(1 for g in FOUR_LUMP.values() if g == "KERO") == 9


def test_lump_unknown_name():
    with pytest.raises(KeyError):
        lumped(FtSafCase().spec, "ten-lump")


def test_lump_mixed_rejected():
    spec = FtSafCase().spec
    lumping = {c: c for c in spec.tagged("hydrocarbon")}
    lumping["C10H22"] = "X"
    lumping["H2"] = "X"
    with pytest.raises(SpecError):
        lump_components(spec, lumping, {"X": {"molar_mass": 10.0, "lhv": 1.0}})


def test_lump_not_total():
    spec = FtSafCase().spec
    with pytest.raises(SpecError):
        lump_components(spec, {"C10H22": "C10H22"})


def test_hydrocarbons():
    assert len(HYDROCARBONS) == 31
    assert HYDROCARBONS[0] == "CH4"
    assert HYDROCARBONS[-1] == "C30PLUS"
    assert carbon_number("C12H26") == 12


def test_elemental_balance_electrolyzer():
    spec = FtSafCase().spec
    for pid in ("AEC", "PEMEC", "SOEC", "ATR"):
        for element, net in elemental_balance(spec, pid).items():
            assert net == pytest.approx(0.0, abs=1e-9), "{} {}".format(pid, element)


def test_normalized_stoich():
    nu = normalized_stoich(Linear({"H2O": -9.0, "H2": 1.0, "O2": 8.0}, "H2"))
    assert nu == {"H2O": -9.0, "H2": 1.0, "O2": 8.0}
    nu = normalized_stoich(Linear({"A": -2.0, "B": 2.0}, "B"))
    assert nu == {"A": -1.0, "B": 1.0}


def test_spec_globals_defaults():
    spec = SuperstructureSpec()
    assert spec.globals["tau"] == 8760.0
    assert spec.with_globals(tau=10.0).globals["tau"] == 10.0
    assert spec.globals["tau"] == 8760.0
