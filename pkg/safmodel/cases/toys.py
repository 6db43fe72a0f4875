# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Small superstructures with hand-computable optima, used by the tests and the
bundled example scenarios.
"""

from . import Case, case
from ..algebra import capital_recovery
from ..core_model import (COLD, FLOW_BASIS, HOT, INLET, OUTLET, ComponentSpec, HeatPortSpec, Linear,
                          PortSpec, ProcessSpec, SuperstructureSpec, molar_mass_from_elements)

__all__ = ["ElectrolysisCase", "ChainCase", "TwoRouteCase", "HeatPairCase", "VentCase"]

WATER = {"H": 2, "O": 1}
HYDROGEN = {"H": 2}
OXYGEN = {"O": 2}


def _component(cid, elements=None, molar_mass=None, **kwargs):
    if molar_mass is None:
        molar_mass = molar_mass_from_elements(elements)
    return ComponentSpec(cid, molar_mass, elements=elements, **kwargs)


def _cr(spec):
    return capital_recovery(spec.globals["r"], spec.globals["theta"])


@case("electrolysis")
class ElectrolysisCase(Case):
    """Single alkaline electrolyzer producing a fixed hydrogen flow"""
    target = 100.0
    water_cost = 0.001
    specific_work = -50.0
    specific_capex = 1000.0
    electricity_price = 0.05

    def build(self):
        components = [
            _component("H2O", WATER, lhv=0.0, src_cost=self.water_cost, src_emission=0.0,
                       tags=frozenset(["source"])),
            _component("H2", HYDROGEN, lhv=33.3, tags=frozenset(["key-eligible"])),
            _component("O2", OXYGEN),
        ]
        m = {c.id: c.molar_mass for c in components}
        stoich = {"H2O": -m["H2O"], "H2": m["H2"], "O2": 0.5 * m["O2"]}
        aec = ProcessSpec("AEC", Linear(stoich, "H2", self.specific_work, self.specific_capex),
                          inlet_ports=[PortSpec("AEC", INLET, 1, ("H2O",))],
                          outlet_ports=[PortSpec("AEC", OUTLET, 1, ("H2",)), PortSpec("AEC", OUTLET, 2, ("O2",))],
                          purity=((INLET, 1, "H2O"), (OUTLET, 1, "H2"), (OUTLET, 2, "O2")))
        return SuperstructureSpec(components, [aec], [],
                                  {"gamma_el": self.electricity_price, "targets": (("AEC", 1, self.target),)})

    def water_per_hydrogen(self):
        return self.spec.component("H2O").molar_mass / self.spec.component("H2").molar_mass

    def expects(self):
        tau = self.spec.globals["tau"]
        water = self.water_per_hydrogen() * self.target
        power = -self.specific_work * self.target
        return {
            ("Msrc", "H2O", "AEC", 1): water,
            ("Wsrc",): power,
            ("Gamma", "AEC"): self.target,
            "objective": _cr(self.spec) * self.specific_capex * self.target
            + tau * (self.water_cost * water + self.electricity_price * power),
        }


@case("chain")
class ChainCase(Case):
    """Two processes in series, A to B to C"""
    target = 10.0
    feed_cost = 1.0
    capex = (10.0, 20.0)

    def build(self):
        components = [
            _component("A", molar_mass=10.0, src_cost=self.feed_cost, src_emission=0.0,
                       tags=frozenset(["source"])),
            _component("B", molar_mass=10.0),
            _component("C", molar_mass=10.0),
        ]
        p1 = ProcessSpec("P1", Linear({"A": -1.0, "B": 1.0}, "B", 0.0, self.capex[0]),
                         inlet_ports=[PortSpec("P1", INLET, 1, ("A",))],
                         outlet_ports=[PortSpec("P1", OUTLET, 1, ("B",))])
        p2 = ProcessSpec("P2", Linear({"B": -1.0, "C": 1.0}, "C", 0.0, self.capex[1]),
                         inlet_ports=[PortSpec("P2", INLET, 1, ("B",), False)],
                         outlet_ports=[PortSpec("P2", OUTLET, 1, ("C",))])
        return SuperstructureSpec(components, [p1, p2], [("P1", 1, "P2", 1)],
                                  {"targets": (("P2", 1, self.target),)})

    def expects(self):
        tau = self.spec.globals["tau"]
        return {
            ("Mflow", "P1", 1, "P2", 1): self.target,
            "objective": tau * self.feed_cost * self.target + _cr(self.spec) * sum(self.capex) * self.target,
        }


@case("two-route")
class TwoRouteCase(Case):
    """
    Two routes to the same fuel: a cheap fossil one with high emissions and an
    expensive biogenic one with low emissions, blended into one product.
    """
    target = 100.0
    fossil = (0.1, 3.0, 100.0)
    bio = (0.5, 0.2, 300.0)

    def build(self):
        components = [
            _component("FOSSIL", molar_mass=100.0, src_cost=self.fossil[0], src_emission=self.fossil[1],
                       tags=frozenset(["source"])),
            _component("BIO", molar_mass=100.0, src_cost=self.bio[0], src_emission=self.bio[1],
                       tags=frozenset(["source"])),
            _component("FUEL", molar_mass=100.0, lhv=12.0),
        ]
        processes = []
        for pid, feed, params in (("Dirty", "FOSSIL", self.fossil), ("Clean", "BIO", self.bio)):
            processes.append(ProcessSpec(pid, Linear({feed: -1.0, "FUEL": 1.0}, "FUEL", 0.0, params[2]),
                                         inlet_ports=[PortSpec(pid, INLET, 1, (feed,))],
                                         outlet_ports=[PortSpec(pid, OUTLET, 1, ("FUEL",), False)]))
        processes.append(ProcessSpec("Blend", Linear({}, None, 0.0, 0.0, FLOW_BASIS),
                                     inlet_ports=[PortSpec("Blend", INLET, 1, ("FUEL",), False)],
                                     outlet_ports=[PortSpec("Blend", OUTLET, 1, ("FUEL",))]))
        return SuperstructureSpec(components, processes,
                                  [("Dirty", 1, "Blend", 1), ("Clean", 1, "Blend", 1)],
                                  {"targets": (("Blend", 1, self.target),)})

    def route(self, params):
        """(cost, emissions) per year when all fuel comes from one route."""
        tau = self.spec.globals["tau"]
        cost = tau * params[0] * self.target + _cr(self.spec) * params[2] * self.target
        return cost, tau * params[1] * self.target

    def expects(self):
        cost_max_e, e_max = self.route(self.fossil)
        cost_min_e, e_min = self.route(self.bio)
        return {"objective": cost_max_e, "emissions_max": e_max,
                "emissions_min": e_min, "cost_at_emissions_min": cost_min_e}


@case("heat-pair")
class HeatPairCase(Case):
    """A heat releasing process feeding a heat consuming one"""
    target = 100.0
    feed_cost = 0.01
    hot_temperature = 300.0
    cold_temperature = 100.0
    hot_duty = 2.0
    cold_duty = -1.0

    def build(self):
        components = [
            _component("R", molar_mass=50.0, src_cost=self.feed_cost, src_emission=0.0,
                       tags=frozenset(["source"])),
            _component("P", molar_mass=50.0),
            _component("Q", molar_mass=50.0),
        ]
        hot = ProcessSpec("Hot", Linear({"R": -1.0, "P": 1.0}, "P", 0.0, 0.0),
                          inlet_ports=[PortSpec("Hot", INLET, 1, ("R",))],
                          outlet_ports=[PortSpec("Hot", OUTLET, 1, ("P",), False)],
                          heat_ports=[HeatPortSpec("Hot", 1, HOT, self.hot_temperature,
                                                   specific_duty=self.hot_duty)])
        cold = ProcessSpec("Cold", Linear({"P": -1.0, "Q": 1.0}, "Q", 0.0, 0.0),
                           inlet_ports=[PortSpec("Cold", INLET, 1, ("P",), False)],
                           outlet_ports=[PortSpec("Cold", OUTLET, 1, ("Q",))],
                           heat_ports=[HeatPortSpec("Cold", 1, COLD, self.cold_temperature,
                                                    specific_duty=self.cold_duty)])
        return SuperstructureSpec(components, [hot, cold], [("Hot", 1, "Cold", 1)],
                                  {"targets": (("Cold", 1, self.target),)})

    def expects(self):
        g = self.spec.globals
        feed = g["tau"] * self.feed_cost * self.target
        heat = g["tau"] * g["gamma_heat"] * -self.cold_duty * self.target
        integrated = self.hot_temperature >= self.cold_temperature + g["dt_min"]
        return {"objective": feed if integrated else feed + heat,
                "objective_without_integration": feed + heat}


@case("vent")
class VentCase(Case):
    """One kg/h of a carbon species released to the atmosphere"""
    species = "CO"
    flow = 1.0

    ELEMENTS = {"CO": {"C": 1, "O": 1}, "CH4": {"C": 1, "H": 4}, "CO2": {"C": 1, "O": 2}}

    def build(self):
        components = [_component(self.species, self.ELEMENTS[self.species], src_cost=0.0, src_emission=0.0,
                                 tags=frozenset(["source"]))]
        vent = ProcessSpec("Vent", Linear({}, None, 0.0, 0.0, FLOW_BASIS),
                           inlet_ports=[PortSpec("Vent", INLET, 1, (self.species,))],
                           outlet_ports=[PortSpec("Vent", OUTLET, 1, (self.species,))])
        return SuperstructureSpec(components, [vent], [], {"targets": (("Vent", 1, self.flow),)})

    def expects(self):
        g = self.spec.globals
        factor = dict((c, f) for c, f, _ in g["co2_terms"])[self.species]
        return {("M_CO2_sink",): g["tau"] * factor * self.flow}
