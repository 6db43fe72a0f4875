# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Analytic process oracles that stand in for rigorous flowsheet simulations of
biomass gasification, reverse water-gas shift and Fischer-Tropsch synthesis,
plus Latin hypercube sampling and dataset files for surrogate training.

All oracle outputs are per kg of total process inlet flow:

``split_<o>``
    mass of outlet ``o`` per kg inlet
``w_out<o>_<component>``
    mass fraction of a component in outlet ``o``
``duty_<h>``
    heat released at heat port ``h`` in kWh/kg (negative for heat demand)
``work``
    net work in kWh/kg (negative for consumption)
"""

import csv
import logging
import math
from collections import namedtuple, OrderedDict
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .core_model import ATOMIC_MASS, molar_mass_from_elements

logger = logging.getLogger(__name__)

DATASET_HEADER = "# safmodel-dataset"

R_GAS = 8.314462618  # kJ/(kmol K)
KELVIN = 273.15

FORMULAS = {
    "H2": {"H": 2}, "O2": {"O": 2}, "N2": {"N": 2}, "CO": {"C": 1, "O": 1},
    "CO2": {"C": 1, "O": 2}, "H2O": {"H": 2, "O": 1}, "NH3": {"N": 1, "H": 3},
    "H2S": {"H": 2, "S": 1},
}
MOLAR_MASS = {k: molar_mass_from_elements(v) for k, v in FORMULAS.items()}

# kJ/kmol at 25 °C, gas phase
FORMATION_ENTHALPY = {"CO": -110.53e3, "CO2": -393.51e3, "H2O": -241.83e3, "CH4": -74.87e3,
                      "NH3": -45.90e3, "H2S": -20.60e3, "H2": 0.0, "O2": 0.0, "SO2": -296.84e3}

# kJ/(kg K), mean values over the process temperature ranges
HEAT_CAPACITY = {"H2": 14.5, "CO": 1.13, "CO2": 1.15, "H2O": 2.1, "CH4": 3.0, "O2": 1.0,
                 "NH3": 2.5, "H2S": 1.1, "biomass": 1.5, "hydrocarbon": 2.4}
WATER_LATENT_HEAT = 2257.0  # kJ/kg

N_TAIL = 35  # carbon number representing the C30+ lump


def alkane_id(n: int) -> str:
    """Component id of the n-alkane with ``n`` carbon atoms, "C30PLUS" for the tail lump."""
    if n > 30:
        return "C30PLUS"
    if n == 1:
        return "CH4"
    return "C{}H{}".format(n, 2 * n + 2)


def alkane_molar_mass(n: int) -> float:
    return ATOMIC_MASS["C"] * n + ATOMIC_MASS["H"] * (2 * n + 2)


HYDROCARBONS = tuple(alkane_id(n) for n in range(1, 32))


class OracleError(Exception):
    """
    Raised for inputs outside an oracle's box or when no physical solution
    exists for the given inputs.
    """
    def __init__(self, name, inputs, reason):
        self.name = name
        self.inputs = tuple(float(v) for v in inputs)
        self.reason = reason

    def __str__(self):
        return "{} oracle failed at inputs {}: {}".format(
            self.name, ", ".join("{:.6g}".format(v) for v in self.inputs), self.reason)


OracleSample = namedtuple("OracleSample", ["inputs", "outputs", "extras"])
OracleSample.__new__.__defaults__ = (None,)
OracleSample.__doc__ = """
One oracle evaluation: raw input vector, ordered output name -> value, and
oracle specific intermediate results (``extras``).
"""


def port_fractions(sample: OracleSample, outlet: int) -> dict:
    """Mass fractions of outlet ``outlet`` keyed by component."""
    prefix = "w_out{}_".format(outlet)
    return {k[len(prefix):]: v for k, v in sample.outputs.items() if k.startswith(prefix)}


AsfParams = namedtuple("AsfParams", ["a", "b", "c", "t_ref", "k_p", "p_ref"])
AsfParams.__new__.__defaults__ = (0.2332, 0.633, 0.0039, 533.0, 0.018, 30.0)
AsfParams.__doc__ = """
Chain growth correlation
``alpha = (a*yCO/(yCO+yH2) + b) * (1 - c*(T_K - t_ref)) * (1 + k_p*ln(p/p_ref))``.
"""

FtParams = namedtuple("FtParams", ["conversion", "h2_recycle", "ch4_slip", "water_carryover",
                                   "reaction_heat", "feed_pressure", "compressor_efficiency", "asf"])
FtParams.__new__.__defaults__ = (0.40, 0.98, 0.10, 0.02, 165.0e3, 10.0, 0.75, AsfParams())

RwgsParams = namedtuple("RwgsParams", ["pressure", "reaction_heat", "condenser_temperature",
                                       "compressor_efficiency"])
RwgsParams.__new__.__defaults__ = (20.0, 41.0e3, 25.0, 0.75)

BiomassSpec = namedtuple("BiomassSpec", ["elements", "ash", "lhv"])
BiomassSpec.__doc__ = """
Dry biomass as pseudo-formula ``CH_xO_yN_zS_s`` per carbon atom, ash mass
fraction and lower heating value of the ash-free part in kJ/kg.
"""

# Placeholder feedstock properties, overridable through GasifierParams
BIOMASS = OrderedDict([
    ("MIS", BiomassSpec({"C": 1.0, "H": 1.47, "O": 0.63, "N": 0.005, "S": 0.0008}, 0.025, 17.8e3)),
    ("WS", BiomassSpec({"C": 1.0, "H": 1.45, "O": 0.65, "N": 0.007, "S": 0.0012}, 0.050, 17.2e3)),
    ("PC", BiomassSpec({"C": 1.0, "H": 1.44, "O": 0.60, "N": 0.002, "S": 0.0003}, 0.005, 18.9e3)),
])

GasifierParams = namedtuple("GasifierParams", ["biomass", "scrub_ratio", "pressure", "agent_temperature",
                                               "cooling_temperature", "pyrolysis_heat", "o2_work",
                                               "feed_work"])
GasifierParams.__new__.__defaults__ = (BIOMASS, 0.5, 1.0, 450.0, 300.0, 300.0, 0.10, 0.01)


def _check_box(name, x, box):
    for v, (lo, hi) in zip(x, box):
        tol = 1e-9 * max(1.0, abs(lo), abs(hi))
        if not (math.isfinite(v) and lo - tol <= v <= hi + tol):
            raise OracleError(name, x, "input {:.6g} outside [{:.6g}, {:.6g}]".format(v, lo, hi))


def asf_alpha(T: float, p: float, w_h2: float, params: AsfParams = None) -> float:
    """
    Chain growth probability of the Anderson-Schulz-Flory distribution.

    :param T: reactor temperature, °C
    :param p: reactor pressure, bar
    :param w_h2: H2 mass fraction of the H2/CO feed
    :param params: correlation coefficients
    :return: alpha in (0, 1)
    :raises OracleError: inputs outside the FT input box
    """
    _check_box("ft", (T, p, w_h2), FtOracle.box)
    params = params or AsfParams()
    n_h2 = w_h2 / MOLAR_MASS["H2"]
    n_co = (1.0 - w_h2) / MOLAR_MASS["CO"]
    y_co = n_co / (n_co + n_h2)
    alpha = (params.a * y_co + params.b) * (1.0 - params.c * (T + KELVIN - params.t_ref)) \
        * (1.0 + params.k_p * math.log(p / params.p_ref))
    if not 0.0 < alpha < 1.0:
        raise OracleError("ft", (T, p, w_h2), "chain growth probability {:.6g} not in (0, 1)".format(alpha))
    return alpha


def asf_distribution(alpha: float, n_max: int = 30) -> np.ndarray:
    """
    Mass fractions ``n (1-alpha)^2 alpha^(n-1)`` for n = 1..n_max followed by
    the closed-form tail beyond n_max, so the vector sums to one.
    """
    n = np.arange(1, n_max + 1, dtype=float)
    w = n * (1.0 - alpha) ** 2 * alpha ** (n - 1.0)
    tail = (n_max + 1) * alpha ** n_max - n_max * alpha ** (n_max + 1)
    return np.append(w, tail)


def oracle(name, inputs, box, categorical=()):
    """
    Decorator for the oracle classes: attaches the oracle name, input names,
    the input box and the indices of one-hot inputs.
    """
    def wrapper(wrapped):
        assert len(inputs) == len(box), "Input box of {} does not match its inputs".format(name)
        wrapped.name = name
        wrapped.input_names = tuple(inputs)
        wrapped.box = tuple(tuple(float(v) for v in b) for b in box)
        wrapped.categorical = tuple(categorical)
        return wrapped
    return wrapper


class Oracle(object):
    """
    Base class of the process oracles. Subclasses are registered with
    :func:`oracle` and evaluate one raw input vector per call.
    """
    name = None
    input_names = ()
    box = ()
    categorical = ()

    def __init__(self, params=None):
        self.params = params

    def output_names(self):
        raise NotImplementedError

    def evaluate(self, x) -> OracleSample:
        raise NotImplementedError

    def __call__(self, x) -> OracleSample:
        x = tuple(float(v) for v in x)
        if len(x) != len(self.input_names):
            raise OracleError(self.name, x, "expected {} inputs".format(len(self.input_names)))
        _check_box(self.name, x, self.box)
        return self.evaluate(x)

    def __repr__(self):
        return "{}({})".format(self.__class__.__name__, ", ".join(self.input_names))


def _port_outputs(outputs, outlet, masses, names):
    total = sum(masses.values())
    for cid in names:
        outputs["w_out{}_{}".format(outlet, cid)] = masses.get(cid, 0.0) / total if total > 0 else 0.0


@oracle("ft", inputs=["T", "p", "w_h2"], box=[(200.0, 300.0), (30.0, 55.0), (0.115, 0.15)])
class FtOracle(Oracle):
    """
    Fischer-Tropsch synthesis with recycle. Outlet 1 carries the hydrocarbons
    and the water carried over into the product, outlet 2 the purge (unreacted
    CO and H2 plus a methane slip), outlet 3 the condensed water. Heat port 1
    releases the reaction heat at reactor temperature, heat port 2 the heat of
    cooling the effluent and condensing the water.
    """
    PURGE = ("CO", "H2", "CH4")

    def output_names(self):
        names = ["w_out1_{}".format(c) for c in HYDROCARBONS + ("H2O_WW",)]
        names += ["w_out2_{}".format(c) for c in self.PURGE]
        return tuple(names + ["split_1", "split_2", "split_3", "duty_1", "duty_2", "work"])

    def evaluate(self, x):
        T, p, w_h2 = x
        params = self.params or FtParams()
        alpha = asf_alpha(T, p, w_h2, params.asf)
        dist = asf_distribution(alpha)
        carbons = np.append(np.arange(1, 31, dtype=float), N_TAIL)

        n_h2 = w_h2 / MOLAR_MASS["H2"]
        n_co = (1.0 - w_h2) / MOLAR_MASS["CO"]
        # dist is a mass distribution; per kg hydrocarbon, chain n holds dist[n] / M_n kmol
        chain_moles = dist / np.array([alkane_molar_mass(int(n)) for n in carbons])
        carbon_per_kg = float(np.sum(chain_moles * carbons))
        h2_per_c = float(np.sum(chain_moles * (2.0 * carbons + 1.0))) / carbon_per_kg
        overall = params.conversion / (1.0 - (1.0 - params.conversion) * params.h2_recycle)
        converted = overall * min(n_co, n_h2 / h2_per_c)
        formed = converted / carbon_per_kg

        hc = OrderedDict()
        for k, n in enumerate(carbons):
            hc[alkane_id(int(n))] = formed * dist[k]
        formed_masses = OrderedDict(hc)
        water = converted * MOLAR_MASS["H2O"]
        ch4 = hc["CH4"]
        hc["CH4"] = ch4 * (1.0 - params.ch4_slip)
        hc["H2O_WW"] = water * params.water_carryover
        purge = OrderedDict([("CO", (n_co - converted) * MOLAR_MASS["CO"]),
                             ("H2", (n_h2 - converted * h2_per_c) * MOLAR_MASS["H2"]),
                             ("CH4", ch4 * params.ch4_slip)])
        condensate = water * (1.0 - params.water_carryover)

        outputs = OrderedDict()
        _port_outputs(outputs, 1, hc, HYDROCARBONS + ("H2O_WW",))
        _port_outputs(outputs, 2, purge, self.PURGE)
        outputs["split_1"] = sum(hc.values())
        outputs["split_2"] = sum(purge.values())
        outputs["split_3"] = condensate

        effluent_cp = (sum(hc.values()) - hc["H2O_WW"]) * HEAT_CAPACITY["hydrocarbon"] \
            + purge["CO"] * HEAT_CAPACITY["CO"] + purge["H2"] * HEAT_CAPACITY["H2"] \
            + water * HEAT_CAPACITY["H2O"]
        outputs["duty_1"] = converted * params.reaction_heat / 3600.0
        outputs["duty_2"] = (effluent_cp * (T - 40.0) + water * WATER_LATENT_HEAT) / 3600.0
        compressed = (n_h2 + n_co) / (1.0 - (1.0 - params.conversion) * params.h2_recycle)
        outputs["work"] = -compressed * R_GAS * 313.15 * math.log(p / params.feed_pressure) \
            / params.compressor_efficiency / 3600.0
        extras = {"alpha": alpha, "distribution": dist, "converted": converted,
                  "hydrocarbons": formed_masses, "consumed_h2": converted * h2_per_c}
        return OracleSample(x, outputs, extras)


def rwgs_equilibrium_constant(T: float) -> float:
    """K of CO2 + H2 = CO + H2O at ``T`` °C."""
    return math.exp(4.33 - 4577.8 / (T + KELVIN))


@oracle("rwgs", inputs=["T", "w_h2"], box=[(850.0, 1000.0), (0.02, 0.25)])
class RwgsOracle(Oracle):
    """
    Reverse water-gas shift at equilibrium. The CO2/H2 feed is compressed,
    heated to reactor temperature and reacted; all water condenses in the
    cooler. Outlet 1 is the dry gas, outlet 2 the water. Heat port 1 is the
    heat demand of preheating and reaction, heat port 2 the heat released on
    cooling and condensation.
    """
    GAS = ("CO2", "H2", "CO")

    def output_names(self):
        return tuple(["w_out1_{}".format(c) for c in self.GAS]
                     + ["split_1", "split_2", "duty_1", "duty_2", "work"])

    def extent(self, T, w_h2):
        """Reaction extent in kmol per kg feed and the equilibrium residual."""
        K = rwgs_equilibrium_constant(T)
        a = (1.0 - w_h2) / MOLAR_MASS["CO2"]
        b = w_h2 / MOLAR_MASS["H2"]
        upper = min(a, b)

        def f(xi):
            return xi * xi - K * (a - xi) * (b - xi)

        xi = optimize.brentq(f, 0.0, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        residual = abs(K - xi * xi / ((a - xi) * (b - xi)))
        return xi, residual

    def evaluate(self, x):
        T, w_h2 = x
        params = self.params or RwgsParams()
        xi, residual = self.extent(T, w_h2)
        if residual > 1e-9:
            raise OracleError(self.name, x, "equilibrium residual {:.3g}".format(residual))
        n_co2 = (1.0 - w_h2) / MOLAR_MASS["CO2"]
        n_h2 = w_h2 / MOLAR_MASS["H2"]
        gas = OrderedDict([("CO2", (n_co2 - xi) * MOLAR_MASS["CO2"]),
                           ("H2", (n_h2 - xi) * MOLAR_MASS["H2"]),
                           ("CO", xi * MOLAR_MASS["CO"])])
        water = xi * MOLAR_MASS["H2O"]

        outputs = OrderedDict()
        _port_outputs(outputs, 1, gas, self.GAS)
        outputs["split_1"] = sum(gas.values())
        outputs["split_2"] = water
        feed_cp = (1.0 - w_h2) * HEAT_CAPACITY["CO2"] + w_h2 * HEAT_CAPACITY["H2"]
        product_cp = sum(gas[c] * HEAT_CAPACITY[c] for c in self.GAS) + water * HEAT_CAPACITY["H2O"]
        dt = params.condenser_temperature
        outputs["duty_1"] = -(feed_cp * (T - dt) + xi * params.reaction_heat) / 3600.0
        outputs["duty_2"] = (product_cp * (T - dt) + water * WATER_LATENT_HEAT) / 3600.0
        outputs["work"] = -(n_co2 + n_h2) * R_GAS * (dt + KELVIN) * math.log(params.pressure) \
            / params.compressor_efficiency / 3600.0
        return OracleSample(x, outputs, {"extent": xi, "residual": residual,
                                         "K": rwgs_equilibrium_constant(T)})


def wgs_equilibrium_constant(T: float) -> float:
    """K of CO + H2O = CO2 + H2 at ``T`` °C."""
    return math.exp(4577.8 / (T + KELVIN) - 4.33)


def smr_equilibrium_constant(T: float) -> float:
    """K of CH4 + H2O = CO + 3 H2 at ``T`` °C, pressures in bar."""
    return math.exp(-26830.0 / (T + KELVIN) + 30.114)


@oracle("gasifier", inputs=["MIS", "WS", "PC", "sb", "cb", "ob", "T"],
        box=[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.01, 1.0), (0.0, 1.0), (0.05, 0.3), (800.0, 1300.0)],
        categorical=(0, 1, 2))
class GasifierOracle(Oracle):
    """
    Equilibrium gasification of one biomass type with steam, O2 and CO2 as
    agents. Carbon, hydrogen and oxygen distribute over CO, CO2, H2, H2O and
    CH4 subject to the water-gas shift and steam methane reforming equilibria;
    nitrogen leaves as NH3 into the scrubber waste water and sulfur as H2S in
    the product gas.

    Inlets: 1 biomass, 2 steam, 3 O2, 4 CO2, 5 scrubber water. Outlets: 1 ash,
    2 waste water, 3 product gas. Heat ports: 1 decomposition and agent
    preheating (demand at 450 °C), 2 reactor (either sign, reactor
    temperature), 3 product gas cooling to 300 °C.
    """
    GAS = ("CO", "CO2", "H2", "H2O", "CH4", "H2S")
    WATER = ("NH3", "H2O_WW")

    def output_names(self):
        return tuple(["split_1", "split_2", "split_3"]
                     + ["w_out2_{}".format(c) for c in self.WATER]
                     + ["w_out3_{}".format(c) for c in self.GAS]
                     + ["duty_1", "duty_2", "duty_3", "work"])

    def biomass_type(self, x):
        names = [self.input_names[k] for k in self.categorical]
        flags = [x[k] for k in self.categorical]
        active = [n for n, f in zip(names, flags) if f > 0.5]
        if len(active) != 1 or any(0.0 < f < 1.0 for f in flags):
            raise OracleError(self.name, x, "exactly one biomass type must be selected")
        return active[0]

    def equilibrium(self, x, C, H, O, n_other):
        """
        Moles of CO, CO2, H2, H2O and CH4 at equilibrium. Solves the shift
        equilibrium for CO2 inside a bracketing search on CH4. The shift
        residual increases in CO2, so its bracket is the open interval of
        positive amounts; the reforming residual tends to +inf at the lower
        and -inf at the upper end of the CH4 interval.

        :raises OracleError: no physical root for this agent loading
        """
        T = x[6]
        p = (self.params or GasifierParams()).pressure
        ln_kw = math.log(wgs_equilibrium_constant(T))
        ln_ks = math.log(smr_equilibrium_constant(T))
        tiny = 1e-13 * C

        def log(v):
            return math.log(max(v, 1e-300))

        def species(a, m):
            co = C - a - m
            h2o = O - C + m - a
            h2 = H / 2.0 - O + C - 3.0 * m + a
            return co, a, h2, h2o, m

        def a_bounds(m):
            return max(0.0, O - C + 3.0 * m - H / 2.0), min(C - m, O - C + m)

        def g1(a, m):
            co, co2, h2, h2o, _ = species(a, m)
            return log(co2) + log(h2) - log(co) - log(h2o) - ln_kw

        def shift(m):
            lo, hi = a_bounds(m)
            if not hi - lo > 2 * tiny:
                return None
            d = max(tiny, 1e-12 * (hi - lo))
            lo, hi = lo + d, hi - d
            if g1(lo, m) >= 0.0:
                return lo
            if g1(hi, m) <= 0.0:
                return hi
            return optimize.brentq(g1, lo, hi, args=(m,), xtol=1e-300,
                                   rtol=4 * np.finfo(float).eps, maxiter=500)

        def g2(m):
            a = shift(m)
            if a is None:
                raise OracleError(self.name, x, "no physical root, shift interval empty at CH4 {:.6g}".format(m))
            co, co2, h2, h2o, ch4 = species(a, m)
            total = co + co2 + h2 + h2o + ch4 + n_other
            return log(co) + 3.0 * log(h2) - log(ch4) - log(h2o) - 2.0 * log(total / p) - ln_ks

        m_lo = max(0.0, C - O)
        m_hi = min(C, (2.0 * C - O + H / 2.0) / 4.0, H / 4.0)
        if not m_hi - m_lo > 4 * tiny:
            raise OracleError(self.name, x, "no physical root, agent loading leaves no feasible product")
        d = max(2 * tiny, 1e-9 * (m_hi - m_lo))
        lo, hi = m_lo + d, m_hi - d
        try:
            f_lo, f_hi = g2(lo), g2(hi)
            if f_lo == 0.0 or f_hi == 0.0:
                m = lo if f_lo == 0.0 else hi
            elif f_lo * f_hi > 0.0:
                raise OracleError(self.name, x, "no physical root, reforming equilibrium not bracketed")
            else:
                m = optimize.brentq(g2, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
            result = species(shift(m), m)
        except (ValueError, TypeError, ZeroDivisionError, RuntimeError) as exc:
            raise OracleError(self.name, x, "no physical root, {}".format(exc))
        if min(result) < 0.0 or not all(math.isfinite(v) for v in result):
            raise OracleError(self.name, x, "no physical root, negative amount at equilibrium")
        return result

    def evaluate(self, x):
        params = self.params or GasifierParams()
        kind = self.biomass_type(x)
        sb, cb, ob, T = x[3:]
        biomass = params.biomass[kind]
        formula_mass = molar_mass_from_elements(biomass.elements)
        organic = 1.0 - biomass.ash
        n_f = organic / formula_mass
        el = {e: n_f * v for e, v in biomass.elements.items()}

        n_nh3 = el.get("N", 0.0)
        n_h2s = el.get("S", 0.0)
        C = el["C"] + cb / MOLAR_MASS["CO2"]
        H = el["H"] + 2.0 * sb / MOLAR_MASS["H2O"] - 3.0 * n_nh3 - 2.0 * n_h2s
        O = el.get("O", 0.0) + sb / MOLAR_MASS["H2O"] + 2.0 * cb / MOLAR_MASS["CO2"] + 2.0 * ob / MOLAR_MASS["O2"]
        co, co2, h2, h2o, ch4 = self.equilibrium(x, C, H, O, n_nh3 + n_h2s)

        moles = OrderedDict([("CO", co), ("CO2", co2), ("H2", h2), ("H2O", h2o), ("CH4", ch4),
                             ("H2S", n_h2s)])
        weights = dict(MOLAR_MASS, CH4=alkane_molar_mass(1))
        gas = OrderedDict((c, n * weights[c]) for c, n in moles.items())
        scrub = params.scrub_ratio
        water = OrderedDict([("NH3", n_nh3 * MOLAR_MASS["NH3"]), ("H2O_WW", scrub)])
        total_in = 1.0 + sb + cb + ob + scrub

        outputs = OrderedDict()
        outputs["split_1"] = biomass.ash / total_in
        outputs["split_2"] = sum(water.values()) / total_in
        outputs["split_3"] = sum(gas.values()) / total_in
        _port_outputs(outputs, 2, water, self.WATER)
        _port_outputs(outputs, 3, gas, self.GAS)

        # formation enthalpy of the ash-free biomass from its heating value
        combustion = el["C"] * FORMATION_ENTHALPY["CO2"] + el["H"] / 2.0 * FORMATION_ENTHALPY["H2O"] \
            + el.get("S", 0.0) * FORMATION_ENTHALPY["SO2"]
        h_biomass = combustion + biomass.lhv * organic
        h_in = h_biomass + sb / MOLAR_MASS["H2O"] * FORMATION_ENTHALPY["H2O"] \
            + cb / MOLAR_MASS["CO2"] * FORMATION_ENTHALPY["CO2"]
        h_out = sum(n * FORMATION_ENTHALPY[c] for c, n in moles.items()) + n_nh3 * FORMATION_ENTHALPY["NH3"]
        gas_cp = sum(gas[c] * HEAT_CAPACITY[c] for c in gas) + water["NH3"] * HEAT_CAPACITY["NH3"]
        agents_cp = sb * HEAT_CAPACITY["H2O"] + cb * HEAT_CAPACITY["CO2"] + ob * HEAT_CAPACITY["O2"]
        t_agent = params.agent_temperature
        decomposition = HEAT_CAPACITY["biomass"] * (t_agent - 25.0) + params.pyrolysis_heat \
            + agents_cp * (t_agent - 25.0)
        reactor = (h_in - h_out) - gas_cp * (T - t_agent)
        cooling = gas_cp * (T - params.cooling_temperature)
        outputs["duty_1"] = -decomposition / 3600.0 / total_in
        outputs["duty_2"] = reactor / 3600.0 / total_in
        outputs["duty_3"] = cooling / 3600.0 / total_in
        outputs["work"] = -(params.o2_work * ob + params.feed_work) / total_in

        extras = {"biomass": kind, "moles": moles, "elements_in": {"C": C, "H": H, "O": O},
                  "total_in": total_in}
        return OracleSample(x, outputs, extras)


def get_oracles(cls=None):
    """
    All registered oracle classes, i.e. subclasses of ``cls`` (default
    :class:`Oracle`) that carry a name.
    """
    if cls is None:
        cls = Oracle
    found = [cls] if cls.name else []
    for subcls in cls.__subclasses__():
        found += get_oracles(subcls)
    return list(dict.fromkeys(found))


def reverse_lookup(name: str):
    """
    Find the oracle class registered under ``name``.

    :return: Oracle class or None
    """
    for o in get_oracles():
        if o.name == name:
            return o
    return None


def ft_oracle(T: float, p: float, w_h2: float, params: FtParams = None) -> OracleSample:
    return FtOracle(params)((T, p, w_h2))


def rwgs_oracle(T: float, w_h2: float, params: RwgsParams = None) -> OracleSample:
    return RwgsOracle(params)((T, w_h2))


def gasifier_oracle(biomass, sb: float, cb: float, ob: float, T: float,
                    params: GasifierParams = None) -> OracleSample:
    """
    :param biomass: biomass id ("MIS", "WS", "PC") or the one-hot vector
    """
    if isinstance(biomass, str):
        biomass = [1.0 if b == biomass else 0.0 for b in GasifierOracle.input_names[:3]]
    return GasifierOracle(params)(tuple(biomass) + (sb, cb, ob, T))


def lhs_sample(box, n: int, seed: int, include_extremes: bool = False) -> np.ndarray:
    """
    Latin hypercube sample of ``n`` points in a box.

    :param box: sequence of (lower, upper) per dimension; lower == upper gives
        a constant column
    :param n: number of points
    :param seed: random seed, equal seeds give identical samples
    :param include_extremes: replace the first and last point by the all-lower
        and all-upper corners
    :return: n x d matrix
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    lo, hi = box[:, 0], box[:, 1]
    if np.any(hi < lo):
        raise ValueError("box has upper bound below lower bound")
    if include_extremes and n < 2:
        raise ValueError("at least 2 points are needed to include the box corners")
    if n == 0:
        return np.zeros((0, len(box)))
    sampler = qmc.LatinHypercube(d=len(box), seed=np.random.default_rng(seed))
    unit = sampler.random(n)
    points = lo + unit * (hi - lo)
    if include_extremes:
        points[0] = lo
        points[-1] = hi
    return points


Dataset = namedtuple("Dataset", ["oracle", "input_names", "output_names", "X", "Y", "seed"])
Dataset.__new__.__defaults__ = (None,)


def _evaluate(args):
    name, row = args
    try:
        sample = reverse_lookup(name)()(row)
    except OracleError as exc:
        return row, None, str(exc)
    return row, list(sample.outputs.values()), None


def oracle_rows(oracle_cls, n: int, seed: int, include_extremes: bool = True, box=None) -> np.ndarray:
    """
    Input rows of a dataset. Oracles with one-hot inputs get ``n`` rows per
    category, the continuous inputs sampled separately for each.
    """
    box = list(box or oracle_cls.box)
    if not oracle_cls.categorical:
        return lhs_sample(box, n, seed, include_extremes)
    cont = [k for k in range(len(box)) if k not in oracle_cls.categorical]
    rows = []
    for c, k in enumerate(oracle_cls.categorical):
        sub = lhs_sample([box[i] for i in cont], n, [seed, c], include_extremes)
        block = np.zeros((n, len(box)))
        block[:, k] = 1.0
        block[:, cont] = sub
        rows.append(block)
    return np.vstack(rows)


def generate_dataset(oracle_name: str, n: int, seed: int, path=None, include_extremes: bool = True,
                     workers: int = 1, box=None) -> Dataset:
    """
    Sample an oracle over its input box and evaluate it. Failed evaluations
    are logged and skipped, the row order follows the sample order.

    :param oracle_name: registered oracle name
    :param n: number of samples (per category for one-hot inputs)
    :param seed: sampling seed
    :param path: CSV file to write, optional
    :param include_extremes: include the box corners
    :param workers: evaluate in this many processes
    :param box: override of the oracle input box
    :return: the dataset
    """
    cls = reverse_lookup(oracle_name)
    if cls is None:
        raise ValueError("unknown oracle {}".format(oracle_name))
    rows = oracle_rows(cls, n, seed, include_extremes, box)
    args = [(oracle_name, tuple(r)) for r in rows]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, args, chunksize=max(1, len(args) // (4 * workers))))
    else:
        results = [_evaluate(a) for a in args]

    X, Y = [], []
    for row, outputs, error in results:
        if outputs is None:
            logger.warning("skipping sample: %s", error)
            continue
        X.append(row)
        Y.append(outputs)
    logger.info("%s dataset: %d of %d samples", oracle_name, len(X), len(rows))
    dataset = Dataset(oracle_name, cls.input_names, cls().output_names(),
                      np.array(X, dtype=float).reshape(-1, len(cls.input_names)),
                      np.array(Y, dtype=float).reshape(len(X), -1), seed)
    if path is not None:
        write_dataset(dataset, path)
    return dataset


def write_dataset(dataset: Dataset, path):
    with open(path, "w", newline="") as f:
        f.write("{} oracle={} seed={} inputs={} rows={}\n".format(
            DATASET_HEADER, dataset.oracle, dataset.seed, len(dataset.input_names), len(dataset.X)))
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(dataset.input_names) + list(dataset.output_names))
        for x, y in zip(dataset.X, dataset.Y):
            writer.writerow(["{:.17g}".format(v) for v in list(x) + list(y)])


def read_dataset(path) -> Dataset:
    """
    Read a dataset CSV. The first line carries the oracle name, the seed and
    the number of input columns.

    :raises ValueError: not a dataset file
    """
    with open(path, newline="") as f:
        first = f.readline().strip()
        if not first.startswith(DATASET_HEADER):
            raise ValueError("{} is not a safmodel dataset".format(path))
        meta = dict(item.split("=", 1) for item in first[len(DATASET_HEADER):].split())
        reader = csv.reader(f)
        names = next(reader)
        values = [[float(v) for v in row] for row in reader if row]
    k = int(meta["inputs"])
    data = np.array(values, dtype=float).reshape(-1, len(names))
    seed = meta.get("seed")
    return Dataset(meta.get("oracle"), tuple(names[:k]), tuple(names[k:]), data[:, :k], data[:, k:],
                   None if seed in (None, "None") else int(seed))
