# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Superstructure description: components, processes with inlet, outlet and heat
ports, admissible connections and the global parameters. Specs are immutable
once built; :func:`validate_superstructure` reports everything that keeps a
spec from being turned into a model.
"""

import logging
from collections import namedtuple, OrderedDict
from types import MappingProxyType

logger = logging.getLogger(__name__)

TAGS = frozenset(["source", "biomass", "kerosene", "gasoline", "diesel",
                  "hydrocarbon", "key-eligible"])
FUEL_TAGS = frozenset(["kerosene", "gasoline", "diesel"])

ATOMIC_MASS = {"C": 12.011, "H": 1.008, "O": 15.999, "N": 14.007,
               "Ar": 39.948, "S": 32.06}

INLET = "inlet"
OUTLET = "outlet"

HOT = "hot"
COLD = "cold"
DUAL = "dual"

SCALE_BASIS = "scale"
FLOW_BASIS = "total-inlet-flow"


class SpecError(Exception):
    """
    Raised when a superstructure cannot be constructed, e.g. a lumping that
    merges hydrocarbon and non-hydrocarbon species.
    """


ComponentSpec = namedtuple("ComponentSpec", ["id", "molar_mass", "lhv", "src_cost", "src_emission",
                                             "tags", "elements", "combustion_co2"])
ComponentSpec.__new__.__defaults__ = (0.0, None, None, frozenset(), None, 0.0)
ComponentSpec.__doc__ = """
Chemical species or pseudo-component.

:param id: symbolic name
:param molar_mass: kg/kmol
:param lhv: lower heating value, kWh/kg
:param src_cost: purchase cost when sourced, $/kg (None if not sourceable)
:param src_emission: supply-chain emission when sourced, kg CO2-eq/kg
:param tags: subset of :data:`TAGS`
:param elements: atoms per molecule (or per formula unit of a pseudo-component)
:param combustion_co2: kg CO2 released per kg on complete oxidation
"""

PortSpec = namedtuple("PortSpec", ["process", "direction", "index", "allowed_components", "external"])
PortSpec.__new__.__defaults__ = ("all", True)

HeatPortSpec = namedtuple("HeatPortSpec", ["process", "index", "mode", "temperature", "temperature_input",
                                           "specific_duty", "duty_bound"])
HeatPortSpec.__new__.__defaults__ = (None, None, None, 5.0)
HeatPortSpec.__doc__ = """
Heat port of a process. The temperature is either fixed (°C) or the ANN input
``temperature_input`` of a surrogate process. ``specific_duty`` is q in kWh
per kg of process scale for linear processes (positive releases heat);
``duty_bound`` bounds the magnitude of a surrogate duty in kWh per kg inlet.
"""

Linear = namedtuple("Linear", ["stoich", "key_component", "specific_work", "specific_capex", "capex_basis"])
Linear.__new__.__defaults__ = (None, 0.0, None, SCALE_BASIS)

Surrogate = namedtuple("Surrogate", ["network_id", "n_inputs", "n_outputs", "input_bindings",
                                     "output_bindings", "specific_capex", "capex_basis", "output_names"])
Surrogate.__new__.__defaults__ = (None, FLOW_BASIS, None)

Binding = namedtuple("Binding", ["index", "quantity"])
Binding.__doc__ = """
Ties ANN input or output ``index`` to a model quantity. Quantities are tuples:

inputs
    ``("w_in", port, component)``, ``("op", name)``, ``("ratio", port, port)``,
    ``("onehot", component, port)``
outputs
    ``("w_out", port, component)``, ``("split", port)``, ``("duty", heat_port)``,
    ``("work",)``, ``("ignore",)``
"""

INPUT_QUANTITIES = frozenset(["w_in", "op", "ratio", "onehot"])
OUTPUT_QUANTITIES = frozenset(["w_out", "split", "duty", "work", "ignore"])

ProcessSpec = namedtuple("ProcessSpec", ["id", "kind", "inlet_ports", "outlet_ports", "heat_ports",
                                         "purity", "flow_ratios"])
ProcessSpec.__new__.__defaults__ = ((), (), ())

Connection = namedtuple("Connection", ["source", "outlet", "target", "inlet"])

Violation = namedtuple("Violation", ["kind", "message"])

DEFAULT_GLOBALS = {
    "tau": 8760.0,
    "r": 0.07,
    "theta": 20.0,
    "gamma_el": 0.1,
    "gamma_heat": 0.05,
    "lambda_el": 0.0,
    "lambda_heat": 0.0,
    "dt_min": 10.0,
    "flow_cap": 60000.0,
    "big_m_heat": None,
    "targets": (),
    "dominance": None,
    "co2_terms": (("CO2", 1.0, (("CS", 1),)),
                  ("CO", 1.571, (("FT", 2),)),
                  ("CH4", 2.743, (("FT", 1),))),
    "dual_port_process": "Gasification",
    "surrogate_link_tol": 0.0,
}


def is_linear(process: ProcessSpec) -> bool:
    return isinstance(process.kind, Linear)


def is_surrogate(process: ProcessSpec) -> bool:
    return isinstance(process.kind, Surrogate)


def molar_mass_from_elements(elements) -> float:
    return sum(ATOMIC_MASS[e] * n for e, n in elements.items())


def element_mass_fractions(component: ComponentSpec) -> dict:
    """
    Mass of each element per kg of component. Empty for components without an
    elemental formula.
    """
    if not component.elements:
        return {}
    total = molar_mass_from_elements(component.elements)
    return {e: ATOMIC_MASS[e] * n / total for e, n in component.elements.items()}


class SuperstructureSpec(object):
    """
    Immutable superstructure: components, processes, connections and globals.

    Globals not given are taken from :data:`DEFAULT_GLOBALS`.
    """
    def __init__(self, components=(), processes=(), connections=(), globals=None):
        self.components = tuple(components)
        self.processes = tuple(p._replace(inlet_ports=tuple(p.inlet_ports), outlet_ports=tuple(p.outlet_ports),
                                          heat_ports=tuple(p.heat_ports), purity=tuple(p.purity)) for p in processes)
        self.connections = tuple(Connection(*c) for c in connections)
        merged = dict(DEFAULT_GLOBALS)
        merged.update(globals or {})
        self.globals = MappingProxyType(merged)
        self._components = OrderedDict((c.id, c) for c in self.components)
        self._processes = OrderedDict((p.id, p) for p in self.processes)

    def replace(self, **kwargs):
        fields = {"components": self.components, "processes": self.processes,
                  "connections": self.connections, "globals": dict(self.globals)}
        fields.update(kwargs)
        return SuperstructureSpec(**fields)

    def with_globals(self, **kwargs):
        g = dict(self.globals)
        g.update(kwargs)
        return self.replace(globals=g)

    def component(self, cid: str) -> ComponentSpec:
        return self._components[cid]

    def process(self, pid: str) -> ProcessSpec:
        return self._processes[pid]

    def has_component(self, cid) -> bool:
        return cid in self._components

    def has_process(self, pid) -> bool:
        return pid in self._processes

    @property
    def component_ids(self):
        return list(self._components.keys())

    def tagged(self, tag: str):
        return [c.id for c in self.components if tag in c.tags]

    def inlets(self):
        return [(p.id, port.index) for p in self.processes for port in p.inlet_ports]

    def outlets(self):
        return [(p.id, port.index) for p in self.processes for port in p.outlet_ports]

    def port(self, pid: str, direction: str, index: int) -> PortSpec:
        process = self._processes[pid]
        ports = process.inlet_ports if direction == INLET else process.outlet_ports
        for port in ports:
            if port.index == index:
                return port
        raise KeyError((pid, direction, index))

    def allowed(self, pid: str, direction: str, index: int):
        """Component ids admissible at a port."""
        allowed = self.port(pid, direction, index).allowed_components
        if allowed == "all":
            return self.component_ids
        return [c for c in self.component_ids if c in allowed]

    def connections_into(self, pid, index):
        return [c for c in self.connections if c.target == pid and c.inlet == index]

    def connections_from(self, pid, index):
        return [c for c in self.connections if c.source == pid and c.outlet == index]

    def heat_ports(self):
        return [(p.id, h) for p in self.processes for h in p.heat_ports]

    def hot_ports(self):
        return [(pid, h) for pid, h in self.heat_ports() if h.mode in (HOT, DUAL)]

    def cold_ports(self):
        return [(pid, h) for pid, h in self.heat_ports() if h.mode in (COLD, DUAL)]

    def __eq__(self, other):
        return (isinstance(other, SuperstructureSpec)
                and self.components == other.components
                and self.processes == other.processes
                and self.connections == other.connections
                and dict(self.globals) == dict(other.globals))

    def __repr__(self):
        return "SuperstructureSpec({} components, {} processes, {} connections)".format(
            len(self.components), len(self.processes), len(self.connections))


class ValidationReport(list):
    """
    List of :class:`Violation`. An empty report means the superstructure is buildable.
    """
    @property
    def ok(self) -> bool:
        return len(self) == 0

    def kinds(self):
        return [v.kind for v in self]

    def add(self, kind, message, *args):
        self.append(Violation(kind, message.format(*args)))

    def __str__(self):
        if self.ok:
            return "superstructure valid"
        return "\n".join("{}: {}".format(v.kind, v.message) for v in self)


def _validate_components(spec, report):
    seen = set()
    for c in spec.components:
        if c.id in seen:
            report.add("duplicate id", "component {}", c.id)
        seen.add(c.id)
        if not c.molar_mass > 0:
            report.add("component", "{} has non-positive molar mass", c.id)
        if c.lhv < 0:
            report.add("component", "{} has negative lhv", c.id)
        unknown = set(c.tags) - TAGS
        if unknown:
            report.add("component", "{} has unknown tags {}", c.id, sorted(unknown))
        sourceable = "source" in c.tags
        if sourceable != (c.src_cost is not None and c.src_emission is not None):
            report.add("component", "{} source tag and source cost/emission disagree", c.id)
        if set(c.tags) & FUEL_TAGS and "hydrocarbon" not in c.tags:
            report.add("component", "{} fuel-range tag without hydrocarbon tag", c.id)


def _validate_globals(spec, report):
    g = spec.globals
    if not g["flow_cap"] > 0:
        report.add("globals", "flow_cap must be positive")
    if not 0 < g["tau"] <= 8784:
        report.add("globals", "tau must be in (0, 8784]")
    if not 0 < g["r"] < 1:
        report.add("globals", "r must be in (0, 1)")
    if not g["theta"] >= 1:
        report.add("globals", "theta must be at least 1")
    for target in g["targets"]:
        pid, index, _ = target
        if not _port_exists(spec, pid, OUTLET, index):
            report.add("dangling port", "production target on {} outlet {}", pid, index)
    dominance = g["dominance"]
    if dominance is not None and not _port_exists(spec, dominance["process"], OUTLET, dominance["port"]):
        report.add("dangling port", "dominance rule on {} outlet {}", dominance["process"], dominance["port"])


def _port_exists(spec, pid, direction, index):
    if not spec.has_process(pid):
        return False
    try:
        spec.port(pid, direction, index)
    except KeyError:
        return False
    return True


def _check_quantity(spec, process, quantity, report, side):
    kind = quantity[0]
    valid = INPUT_QUANTITIES if side == "input" else OUTPUT_QUANTITIES
    if kind not in valid:
        report.add("binding", "{} {} quantity {} is not allowed", process.id, side, quantity)
        return
    inlets = [p.index for p in process.inlet_ports]
    outlets = [p.index for p in process.outlet_ports]
    heat = [h.index for h in process.heat_ports]
    if kind == "w_in" and (quantity[1] not in inlets or not spec.has_component(quantity[2])):
        report.add("binding", "{} binds missing inlet quantity {}", process.id, quantity)
    elif kind == "w_out" and (quantity[1] not in outlets or not spec.has_component(quantity[2])):
        report.add("binding", "{} binds missing outlet quantity {}", process.id, quantity)
    elif kind == "ratio" and (quantity[1] not in inlets or quantity[2] not in inlets):
        report.add("binding", "{} binds ratio of missing inlets {}", process.id, quantity)
    elif kind == "onehot" and (not spec.has_component(quantity[1]) or quantity[2] not in inlets):
        report.add("binding", "{} binds missing one-hot quantity {}", process.id, quantity)
    elif kind == "split" and quantity[1] not in outlets:
        report.add("binding", "{} binds split of missing outlet {}", process.id, quantity)
    elif kind == "duty" and quantity[1] not in heat:
        report.add("binding", "{} binds duty of missing heat port {}", process.id, quantity)


def _validate_process(spec, process, report):
    for direction, ports in ((INLET, process.inlet_ports), (OUTLET, process.outlet_ports)):
        indices = [p.index for p in ports]
        if len(set(indices)) != len(indices):
            report.add("duplicate id", "{} has duplicate {} indices", process.id, direction)
        for port in ports:
            if port.allowed_components != "all":
                for cid in port.allowed_components:
                    if not spec.has_component(cid):
                        report.add("component", "{} {} {} allows unknown component {}",
                                   process.id, direction, port.index, cid)
    if len(set(h.index for h in process.heat_ports)) != len(process.heat_ports):
        report.add("duplicate id", "{} has duplicate heat port indices", process.id)

    kind = process.kind
    if is_linear(process):
        if kind.stoich and kind.key_component is None:
            report.add("missing key component", "{} has a stoichiometry but no key component", process.id)
        elif kind.key_component is not None and kind.stoich.get(kind.key_component, 0.0) <= 0:
            report.add("missing key component", "{} key component {} is not produced",
                       process.id, kind.key_component)
        for cid in kind.stoich:
            if not spec.has_component(cid):
                report.add("component", "{} stoichiometry references unknown {}", process.id, cid)
        if kind.specific_capex is None:
            report.add("capex", "{} has no CAPEX basis", process.id)
        if not kind.stoich and kind.capex_basis == SCALE_BASIS and kind.specific_capex:
            report.add("capex", "{} is a separator and needs the total-inlet-flow CAPEX basis", process.id)
    elif is_surrogate(process):
        for side, bindings, n in (("input", kind.input_bindings, kind.n_inputs),
                                  ("output", kind.output_bindings, kind.n_outputs)):
            indices = sorted(b.index for b in bindings)
            if indices != list(range(n)):
                report.add("unbound ANN index", "{} {} bindings cover {} of {} indices",
                           process.id, side, len(set(indices)), n)
            for b in bindings:
                _check_quantity(spec, process, b.quantity, report, side)
        if kind.specific_capex is None:
            report.add("capex", "{} has no CAPEX basis", process.id)
        duties = set(b.quantity for b in kind.output_bindings)
        for h in process.heat_ports:
            if ("duty", h.index) not in duties:
                report.add("binding", "{} heat port {} has no duty output", process.id, h.index)
        bound = set((b.quantity[1], b.quantity[2]) for b in kind.output_bindings if b.quantity[0] == "w_out")
        for port in process.outlet_ports:
            free = [c for c in spec.allowed(process.id, OUTLET, port.index) if (port.index, c) not in bound]
            if len(free) > 1:
                report.add("binding", "{} outlet {} leaves {} components undetermined: {}",
                           process.id, port.index, len(free), ", ".join(free))
    else:
        report.add("process", "{} has unknown kind", process.id)

    for h in process.heat_ports:
        if h.mode not in (HOT, COLD, DUAL):
            report.add("heat port", "{} heat port {} has unknown mode {}", process.id, h.index, h.mode)
        if h.temperature is None and h.temperature_input is None:
            report.add("heat port", "{} heat port {} has no temperature", process.id, h.index)
        if h.temperature is not None and not -200.0 <= h.temperature <= 1600.0:
            report.add("heat port", "{} heat port {} temperature out of range", process.id, h.index)
        if h.temperature_input is not None and (not is_surrogate(process)
                                                or not 0 <= h.temperature_input < process.kind.n_inputs):
            report.add("heat port", "{} heat port {} temperature input invalid", process.id, h.index)
        if is_linear(process) and h.specific_duty is None:
            report.add("heat port", "{} heat port {} has no specific duty", process.id, h.index)

    for direction, index, cid in process.purity:
        if not _port_exists(spec, process.id, direction, index) or not spec.has_component(cid):
            report.add("dangling port", "{} purity rule on {} {} {}", process.id, direction, index, cid)
    for num, den, _ in process.flow_ratios:
        if not _port_exists(spec, process.id, INLET, num) or not _port_exists(spec, process.id, INLET, den):
            report.add("dangling port", "{} flow ratio between inlets {} and {}", process.id, num, den)


def _validate_topology(spec, report):
    seen = set()
    for c in spec.connections:
        if not _port_exists(spec, c.source, OUTLET, c.outlet):
            report.add("dangling port", "connection from {} outlet {}", c.source, c.outlet)
        if not _port_exists(spec, c.target, INLET, c.inlet):
            report.add("dangling port", "connection to {} inlet {}", c.target, c.inlet)
        if c in seen:
            report.add("duplicate id", "connection {} listed twice", tuple(c))
        seen.add(c)

    sources = set(spec.tagged("source"))
    for process in spec.processes:
        fed = False
        for port in process.inlet_ports:
            if spec.connections_into(process.id, port.index):
                fed = True
            elif port.external and sources & set(spec.allowed(process.id, INLET, port.index)):
                fed = True
        if process.inlet_ports and not fed:
            report.add("unreachable process", "{} cannot receive any feed", process.id)


def _validate_heat(spec, report):
    duals = [(pid, h) for pid, h in spec.heat_ports() if h.mode == DUAL]
    if len(duals) > 1:
        report.add("heat port", "{} dual heat ports declared, at most one allowed", len(duals))
    for pid, h in duals:
        if pid != spec.globals["dual_port_process"]:
            report.add("heat port", "dual heat port on {}, only {} may have one",
                       pid, spec.globals["dual_port_process"])


def validate_superstructure(spec: SuperstructureSpec) -> ValidationReport:
    """
    Check a superstructure for everything that keeps it from being assembled:
    dangling port references, unbound ANN indices, duplicate ids, unreachable
    processes and missing key components, plus parameter ranges.

    Never raises, all problems are collected in the report.

    :param spec: Superstructure to check
    :return: Report, empty if buildable
    """
    report = ValidationReport()
    _validate_components(spec, report)
    seen = set()
    for process in spec.processes:
        if process.id in seen:
            report.add("duplicate id", "process {}", process.id)
        seen.add(process.id)
        _validate_process(spec, process, report)
    _validate_topology(spec, report)
    _validate_heat(spec, report)
    _validate_globals(spec, report)
    return report


def elemental_balance(spec: SuperstructureSpec, pid: str) -> dict:
    """
    Net element production (kg per kg of process scale) of a linear process.
    Zero for an elementally balanced stoichiometry.
    """
    process = spec.process(pid)
    balance = {}
    for cid, nu in normalized_stoich(process.kind).items():
        for element, fraction in element_mass_fractions(spec.component(cid)).items():
            balance[element] = balance.get(element, 0.0) + nu * fraction
    return balance


def normalized_stoich(kind: Linear) -> dict:
    """
    Mass stoichiometry scaled so that the key component coefficient is 1; the
    scale Γ is then the key component production in kg/h.
    """
    if not kind.stoich:
        return {}
    key = kind.stoich[kind.key_component]
    return {cid: nu / key for cid, nu in kind.stoich.items()}


def _repoint(mapping, cid):
    return mapping.get(cid, cid)


def lump_components(spec: SuperstructureSpec, lumping: dict, groups: dict = None) -> SuperstructureSpec:
    """
    Replace hydrocarbon components by group pseudo-components.

    :param spec: Superstructure
    :param lumping: component id -> group id, total over hydrocarbons. A
        component mapped to itself is kept.
    :param groups: group id -> attributes of the new pseudo-component
        (``lhv``, ``molar_mass``, ``tags`` and optionally ``src_cost``,
        ``src_emission``, ``elements``, ``combustion_co2``)
    :return: New superstructure with stoichiometries, port restrictions, ANN
        output bindings and emission terms re-pointed to the groups
    :raises SpecError: lumping merges hydrocarbon and non-hydrocarbon species
        or breaks tag consistency
    """
    groups = groups or {}
    mapping = {}
    for cid, group in lumping.items():
        if not spec.has_component(cid):
            raise SpecError("lumping references unknown component {}".format(cid))
        mapping[cid] = group
    hydrocarbons = set(spec.tagged("hydrocarbon"))
    for cid in hydrocarbons:
        mapping.setdefault(cid, cid)
        if cid not in lumping:
            raise SpecError("lumping is not total, hydrocarbon {} is unmapped".format(cid))

    members = OrderedDict()
    for cid in spec.component_ids:
        members.setdefault(_repoint(mapping, cid), []).append(cid)

    components = []
    for group, cids in members.items():
        if cids == [group]:
            components.append(spec.component(group))
            continue
        kinds = set("hydrocarbon" in spec.component(c).tags for c in cids)
        if kinds != {True}:
            raise SpecError("group {} merges hydrocarbon and non-hydrocarbon species".format(group))
        if group not in groups:
            raise SpecError("group {} needs lhv and molar mass metadata".format(group))
        meta = groups[group]
        tags = frozenset(meta.get("tags", ["hydrocarbon"]))
        for c in cids:
            for fuel in spec.component(c).tags & FUEL_TAGS:
                if fuel not in tags:
                    raise SpecError("{} is {} but group {} is not".format(c, fuel, group))
        components.append(ComponentSpec(group, meta["molar_mass"], meta["lhv"],
                                        meta.get("src_cost"), meta.get("src_emission"), tags,
                                        meta.get("elements"), meta.get("combustion_co2", 0.0)))

    def ports(plist):
        out = []
        for port in plist:
            allowed = port.allowed_components
            if allowed != "all":
                allowed = tuple(OrderedDict.fromkeys(_repoint(mapping, c) for c in allowed))
            out.append(port._replace(allowed_components=allowed))
        return tuple(out)

    processes = []
    for process in spec.processes:
        kind = process.kind
        if is_linear(process):
            stoich = OrderedDict()
            for cid, nu in kind.stoich.items():
                g = _repoint(mapping, cid)
                stoich[g] = stoich.get(g, 0.0) + nu
            kind = kind._replace(stoich=stoich, key_component=_repoint(mapping, kind.key_component))
        else:
            for b in kind.input_bindings:
                if b.quantity[0] in ("w_in", "onehot"):
                    cid = b.quantity[2] if b.quantity[0] == "w_in" else b.quantity[1]
                    if _repoint(mapping, cid) != cid:
                        raise SpecError("{} ANN input {} binds lumped component {}".format(process.id, b.index, cid))
            outputs = []
            for b in kind.output_bindings:
                q = b.quantity
                if q[0] == "w_out":
                    q = ("w_out", q[1], _repoint(mapping, q[2]))
                outputs.append(Binding(b.index, q))
            kind = kind._replace(output_bindings=tuple(outputs))
        purity = tuple((d, i, _repoint(mapping, c)) for d, i, c in process.purity)
        processes.append(process._replace(kind=kind, inlet_ports=ports(process.inlet_ports),
                                          outlet_ports=ports(process.outlet_ports), purity=purity))

    g = dict(spec.globals)
    g["co2_terms"] = tuple((_repoint(mapping, c), factor, excl) for c, factor, excl in g["co2_terms"])
    if g["dominance"] is not None:
        dominance = dict(g["dominance"])
        dominance["water"] = _repoint(mapping, dominance["water"])
        g["dominance"] = dominance
    logger.info("lumped %d components into %d", len(spec.components), len(components))
    return SuperstructureSpec(components, processes, spec.connections, g)
