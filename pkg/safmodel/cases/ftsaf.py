# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Superstructure for sustainable aviation fuel from Fischer-Tropsch synthesis.

Syngas is made from biomass (gasification), natural gas (autothermal
reforming) or CO2 and hydrogen (reverse water-gas shift), cleaned in an acid
gas removal unit and converted in the Fischer-Tropsch reactor. Hydrogen comes
from three electrolyzer types, oxygen from electrolysis or air separation,
CO2 from direct air capture or recycled from the acid gas removal; CO2 can be
stored. Gasification, RWGS and FT are surrogate processes, all others are
linear.

Cost and emission figures are representative placeholders.
"""

from collections import OrderedDict

from . import Case, case
from ..core_model import (ATOMIC_MASS, COLD, DUAL, FLOW_BASIS, HOT, INLET, OUTLET, Binding, ComponentSpec,
                          HeatPortSpec, Linear, PortSpec, ProcessSpec, Surrogate, SuperstructureSpec,
                          lump_components, molar_mass_from_elements)
from ..oracles import BIOMASS, HYDROCARBONS, N_TAIL, FtOracle, GasifierOracle, RwgsOracle

__all__ = ["FtSafCase", "FOUR_LUMP", "LUMPINGS", "lumped", "bind_outputs", "carbon_number"]

CO2_MASS = molar_mass_from_elements({"C": 1, "O": 2})

# Atmospheric air per formula unit
AIR = {"N": 1.5618, "O": 0.4196, "Ar": 0.0093}

GASES = OrderedDict([
    ("H2O", {"H": 2, "O": 1}), ("H2O_WW", {"H": 2, "O": 1}), ("O2", {"O": 2}), ("N2", {"N": 2}),
    ("AR", {"Ar": 1}), ("AIR", AIR), ("CO2", {"C": 1, "O": 2}), ("CO2_ATM", {"C": 1, "O": 2}),
    ("CO", {"C": 1, "O": 1}), ("H2", {"H": 2}), ("ASH", None), ("NH3", {"N": 1, "H": 3}),
    ("H2S", {"H": 2, "S": 1}),
])

LHV = {"H2": 33.3, "CO": 2.8, "CH4": 13.9, "NH3": 5.2, "H2S": 4.3}  # kWh/kg

# src_cost $/kg, src_emission kg CO2-eq/kg
SOURCES = {"H2O": (0.002, 0.0003), "AIR": (0.0, 0.0), "CO2_ATM": (0.0, -1.0), "CH4": (0.35, 0.6)}
BIOMASS_COST = {"MIS": (0.08, 0.05), "WS": (0.06, 0.04), "PC": (0.10, 0.06)}


def carbon_number(cid: str) -> int:
    return N_TAIL if cid == "C30PLUS" else (1 if cid == "CH4" else int(cid[1:].split("H")[0]))


def _hydrocarbon(cid):
    n = carbon_number(cid)
    elements = {"C": n, "H": 2 * n + 2}
    mass = molar_mass_from_elements(elements)
    tags = {"hydrocarbon"}
    if 5 <= n <= 7:
        tags.add("gasoline")
    elif 8 <= n <= 16:
        tags.add("kerosene")
    elif n >= 17:
        tags.add("diesel")
    cost, emission = SOURCES.get(cid, (None, None))
    if cost is not None:
        tags.add("source")
    lhv = LHV.get(cid, (44.0 + 6.0 / n) / 3.6)
    return ComponentSpec(cid, mass, lhv, cost, emission, frozenset(tags), elements, n * CO2_MASS / mass)


def _biomass(cid):
    spec = BIOMASS[cid]
    formula = molar_mass_from_elements(spec.elements)
    cost, supply = BIOMASS_COST[cid]
    # carbon taken up while growing is credited on purchase
    uptake = (1.0 - spec.ash) * spec.elements["C"] * CO2_MASS / formula
    return ComponentSpec(cid, formula / (1.0 - spec.ash), spec.lhv * (1.0 - spec.ash) / 3600.0,
                         cost, supply - uptake, frozenset(["source", "biomass"]), dict(spec.elements))


def _gas(cid, elements):
    cost, emission = SOURCES.get(cid, (None, None))
    tags = {"source"} if cost is not None else set()
    if cid in ("H2", "O2", "CO", "CO2"):
        tags.add("key-eligible")
    mass = molar_mass_from_elements(elements) if elements else 100.0
    co2 = 0.0
    if elements and elements.get("C") and cid not in ("CO2", "CO2_ATM"):
        co2 = elements["C"] * CO2_MASS / mass
    return ComponentSpec(cid, mass, LHV.get(cid, 0.0), cost, emission, frozenset(tags), elements, co2)


def components():
    """The 47 components: 31 alkanes, 3 biomass types and 13 gases and residues."""
    return [_hydrocarbon(c) for c in HYDROCARBONS] + [_biomass(c) for c in BIOMASS] \
        + [_gas(c, e) for c, e in GASES.items()]


def _mass(elements):
    return molar_mass_from_elements(elements)


def _mol_stoich(moles):
    """Mass stoichiometry from molar coefficients of species formulas."""
    formulas = dict(GASES, CH4={"C": 1, "H": 4})
    return OrderedDict((cid, nu * _mass(formulas[cid])) for cid, nu in moles.items())


def bind_outputs(names, closures=()):
    """
    Output bindings from oracle output names. Outputs listed in ``closures``
    are left unbound, the process mass balance determines them.
    """
    bindings = []
    for k, name in enumerate(names):
        if name in closures:
            q = ("ignore",)
        elif name.startswith("w_out"):
            port, cid = name[len("w_out"):].split("_", 1)
            q = ("w_out", int(port), cid)
        elif name.startswith("split_"):
            q = ("split", int(name[len("split_"):]))
        elif name.startswith("duty_"):
            q = ("duty", int(name[len("duty_"):]))
        elif name == "work":
            q = ("work",)
        else:
            raise ValueError("cannot bind output {}".format(name))
        bindings.append(Binding(k, q))
    return tuple(bindings)


def _electrolyzer(pid, work, capex, heat=None):
    stoich = {"H2O": -_mass(GASES["H2O"]), "H2": _mass(GASES["H2"]), "O2": 0.5 * _mass(GASES["O2"])}
    heat_ports = [HeatPortSpec(pid, 1, COLD, heat[0], specific_duty=heat[1])] if heat else []
    return ProcessSpec(pid, Linear(stoich, "H2", work, capex),
                       inlet_ports=[PortSpec(pid, INLET, 1, ("H2O",))],
                       outlet_ports=[PortSpec(pid, OUTLET, 1, ("H2",)), PortSpec(pid, OUTLET, 2, ("O2",))],
                       heat_ports=heat_ports,
                       purity=((INLET, 1, "H2O"), (OUTLET, 1, "H2"), (OUTLET, 2, "O2")))


def linear_processes():
    air = _mass(AIR)
    o2 = AIR["O"] * ATOMIC_MASS["O"]
    asu = ProcessSpec("ASU", Linear({"AIR": -air / o2, "O2": 1.0, "N2": AIR["N"] * ATOMIC_MASS["N"] / o2,
                                     "AR": AIR["Ar"] * ATOMIC_MASS["Ar"] / o2}, "O2", -0.25, 2500.0),
                      inlet_ports=[PortSpec("ASU", INLET, 1, ("AIR",))],
                      outlet_ports=[PortSpec("ASU", OUTLET, 1, ("O2",)), PortSpec("ASU", OUTLET, 2, ("N2", "AR"))],
                      purity=((OUTLET, 1, "O2"),))
    dac = ProcessSpec("DAC", Linear({"CO2_ATM": -1.0, "CO2": 1.0}, "CO2", -0.25, 6000.0),
                      inlet_ports=[PortSpec("DAC", INLET, 1, ("CO2_ATM",))],
                      outlet_ports=[PortSpec("DAC", OUTLET, 1, ("CO2",))],
                      heat_ports=[HeatPortSpec("DAC", 1, COLD, 100.0, specific_duty=-1.5)])
    # CH4 + 0.65 O2 -> 0.9 CO + 0.1 CO2 + 1.8 H2 + 0.2 H2O
    atr = ProcessSpec("ATR", Linear(_mol_stoich(OrderedDict([("CH4", -1.0), ("O2", -0.65), ("CO", 0.9),
                                                             ("CO2", 0.1), ("H2", 1.8), ("H2O", 0.2)])),
                                    "CO", -0.3, 700.0),
                      inlet_ports=[PortSpec("ATR", INLET, 1, ("CH4",)), PortSpec("ATR", INLET, 2, ("O2",))],
                      outlet_ports=[PortSpec("ATR", OUTLET, 1, ("CO", "CO2", "H2", "H2O"), False)],
                      heat_ports=[HeatPortSpec("ATR", 1, HOT, 300.0, specific_duty=0.5)])
    agr = ProcessSpec("AGR", Linear({}, None, -0.1, 400.0, FLOW_BASIS),
                      inlet_ports=[PortSpec("AGR", INLET, 1, ("CO", "CO2", "H2", "H2O", "CH4", "H2S"), False)],
                      outlet_ports=[PortSpec("AGR", OUTLET, 1, ("CO2",)),
                                    PortSpec("AGR", OUTLET, 2, ("CO", "H2"), False),
                                    PortSpec("AGR", OUTLET, 3, ("H2O", "CH4", "H2S"))],
                      purity=((OUTLET, 1, "CO2"),))
    cs = ProcessSpec("CS", Linear({}, None, -0.03, 50.0, FLOW_BASIS),
                     inlet_ports=[PortSpec("CS", INLET, 1, ("CO2",), False)],
                     outlet_ports=[PortSpec("CS", OUTLET, 1, ("CO2",))],
                     purity=((INLET, 1, "CO2"),))
    return [asu, dac,
            _electrolyzer("AEC", -52.0, 9000.0),
            _electrolyzer("PEMEC", -55.0, 11000.0),
            _electrolyzer("SOEC", -40.0, 16000.0, heat=(150.0, -10.0)),
            atr, agr, cs]


def surrogate_processes():
    gas = GasifierOracle()
    gasifier = ProcessSpec(
        "Gasification",
        Surrogate("gasifier", len(gas.input_names), len(gas.output_names()),
                  (Binding(0, ("onehot", "MIS", 1)), Binding(1, ("onehot", "WS", 1)),
                   Binding(2, ("onehot", "PC", 1)), Binding(3, ("ratio", 2, 1)),
                   Binding(4, ("ratio", 4, 1)), Binding(5, ("ratio", 3, 1)), Binding(6, ("op", "T"))),
                  bind_outputs(gas.output_names(), ("split_3", "w_out2_H2O_WW", "w_out3_H2O")),
                  900.0, FLOW_BASIS, gas.output_names()),
        inlet_ports=[PortSpec("Gasification", INLET, 1, tuple(BIOMASS)),
                     PortSpec("Gasification", INLET, 2, ("H2O",)),
                     PortSpec("Gasification", INLET, 3, ("O2",), False),
                     PortSpec("Gasification", INLET, 4, ("CO2",), False),
                     PortSpec("Gasification", INLET, 5, ("H2O",))],
        outlet_ports=[PortSpec("Gasification", OUTLET, 1, ("ASH",)),
                      PortSpec("Gasification", OUTLET, 2, ("NH3", "H2O_WW")),
                      PortSpec("Gasification", OUTLET, 3, GasifierOracle.GAS, False)],
        heat_ports=[HeatPortSpec("Gasification", 1, COLD, 450.0),
                    HeatPortSpec("Gasification", 2, DUAL, temperature_input=6),
                    HeatPortSpec("Gasification", 3, HOT, 300.0)],
        flow_ratios=((5, 1, 0.5),))

    rwgs_oracle = RwgsOracle()
    rwgs = ProcessSpec(
        "RWGS",
        Surrogate("rwgs", len(rwgs_oracle.input_names), len(rwgs_oracle.output_names()),
                  (Binding(0, ("op", "T")), Binding(1, ("w_in", 1, "H2"))),
                  bind_outputs(rwgs_oracle.output_names(), ("w_out1_H2", "split_2")),
                  600.0, FLOW_BASIS, rwgs_oracle.output_names()),
        inlet_ports=[PortSpec("RWGS", INLET, 1, ("CO2", "H2"), False)],
        outlet_ports=[PortSpec("RWGS", OUTLET, 1, RwgsOracle.GAS, False),
                      PortSpec("RWGS", OUTLET, 2, ("H2O",))],
        heat_ports=[HeatPortSpec("RWGS", 1, COLD, temperature_input=0),
                    HeatPortSpec("RWGS", 2, HOT, 250.0)])

    ft_oracle = FtOracle()
    ft = ProcessSpec(
        "FT",
        Surrogate("ft", len(ft_oracle.input_names), len(ft_oracle.output_names()),
                  (Binding(0, ("op", "T")), Binding(1, ("op", "p")), Binding(2, ("w_in", 1, "H2"))),
                  bind_outputs(ft_oracle.output_names(), ("w_out1_H2O_WW", "w_out2_H2", "split_3")),
                  1500.0, FLOW_BASIS, ft_oracle.output_names()),
        inlet_ports=[PortSpec("FT", INLET, 1, ("CO", "H2"), False)],
        outlet_ports=[PortSpec("FT", OUTLET, 1, HYDROCARBONS + ("H2O_WW",)),
                      PortSpec("FT", OUTLET, 2, FtOracle.PURGE),
                      PortSpec("FT", OUTLET, 3, ("H2O",))],
        heat_ports=[HeatPortSpec("FT", 1, HOT, temperature_input=0),
                    HeatPortSpec("FT", 2, HOT, 80.0)])
    return [gasifier, rwgs, ft]


H2_PRODUCERS = ("AEC", "PEMEC", "SOEC")
O2_PRODUCERS = ("ASU",) + H2_PRODUCERS


def connections():
    conns = []
    conns += [(p, 2, "Gasification", 3) for p in H2_PRODUCERS] + [("ASU", 1, "Gasification", 3)]
    conns += [(p, 2, "ATR", 2) for p in H2_PRODUCERS] + [("ASU", 1, "ATR", 2)]
    conns += [("AGR", 1, "Gasification", 4), ("DAC", 1, "Gasification", 4)]
    conns += [("Gasification", 3, "AGR", 1), ("ATR", 1, "AGR", 1), ("RWGS", 1, "AGR", 1)]
    conns += [("AGR", 1, "RWGS", 1), ("DAC", 1, "RWGS", 1)] + [(p, 1, "RWGS", 1) for p in H2_PRODUCERS]
    conns += [("AGR", 2, "FT", 1)] + [(p, 1, "FT", 1) for p in H2_PRODUCERS]
    conns += [("AGR", 1, "CS", 1), ("DAC", 1, "CS", 1)]
    return conns


def _four_lump(cid):
    n = carbon_number(cid)
    return "GAS" if n <= 4 else "NAPHTHA" if n <= 7 else "KERO" if n <= 16 else "HEAVY"


FOUR_LUMP = OrderedDict((c, _four_lump(c)) for c in HYDROCARBONS)


def _lump_meta(elements, lhv, tags, **kwargs):
    mass = molar_mass_from_elements(elements)
    meta = {"molar_mass": mass, "lhv": lhv, "tags": tags, "elements": elements,
            "combustion_co2": elements["C"] * CO2_MASS / mass}
    meta.update(kwargs)
    return meta


# Representative formulas; GAS keeps the natural gas price of methane
FOUR_LUMP_GROUPS = {
    "GAS": _lump_meta({"C": 1, "H": 4}, 13.5, ["hydrocarbon", "source"],
                      src_cost=SOURCES["CH4"][0], src_emission=SOURCES["CH4"][1]),
    "NAPHTHA": _lump_meta({"C": 6, "H": 14}, 12.4, ["hydrocarbon", "gasoline"]),
    "KERO": _lump_meta({"C": 12, "H": 26}, 12.25, ["hydrocarbon", "kerosene"]),
    "HEAVY": _lump_meta({"C": 22, "H": 46}, 12.1, ["hydrocarbon", "diesel"]),
}

LUMPINGS = {"four-lump": (FOUR_LUMP, FOUR_LUMP_GROUPS)}


def lumped(spec: SuperstructureSpec, name: str) -> SuperstructureSpec:
    """Apply a named lumping to a superstructure."""
    if name not in LUMPINGS:
        raise KeyError("unknown lumping {}, known: {}".format(name, ", ".join(sorted(LUMPINGS))))
    mapping, groups = LUMPINGS[name]
    return lump_components(spec, mapping, groups)


@case("ftsaf")
class FtSafCase(Case):
    """Biomass, natural gas and power-to-liquid routes to FT kerosene"""
    target = 3000.0
    electricity_price = 0.05
    electricity_emission = 0.03
    heat_price = 0.03
    heat_emission = 0.2

    def build(self):
        g = {"targets": (("FT", 1, self.target),),
             "dominance": {"process": "FT", "port": 1, "water": "H2O_WW", "purge": 2},
             "gamma_el": self.electricity_price, "lambda_el": self.electricity_emission,
             "gamma_heat": self.heat_price, "lambda_heat": self.heat_emission,
             "dual_port_process": "Gasification"}
        return SuperstructureSpec(components(), linear_processes() + surrogate_processes(), connections(), g)

    def expects(self):
        return {"components": 47, "processes": 11, "lumped_components": 20,
                "surrogates": ["Gasification", "RWGS", "FT"]}
