# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Scenario driver: builds models from scenario files, runs ε-constraint Pareto
sweeps and price sensitivities, and evaluates solutions after optimization
(kerosene allocation, abatement cost, cost breakdown, feedstock flows).
"""

import csv
import json
import logging
import math
from collections import namedtuple, OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cases
from .algebra import EQ, LE, assemble_model, format_label
from .config import ConfigError, ScenarioFile, load_scenario, resolve, section
from .core_model import (ATOMIC_MASS, INLET, OUTLET, Binding, ComponentSpec, HeatPortSpec, Linear, PortSpec,
                         ProcessSpec, SpecError, Surrogate, SuperstructureSpec, element_mass_fractions,
                         is_surrogate, validate_superstructure)
from .solver import FEASIBLE, INFEASIBLE, OPTIMAL, SolverOptions, solve_miqcp
from .surrogate import load_network

logger = logging.getLogger(__name__)

CO_FACTOR = 1.571
UNDEFINED = None

ScenarioConfig = namedtuple("ScenarioConfig", ["name", "spec", "networks", "co2_caps", "n_caps", "frozen_vars",
                                               "disabled_processes", "heat_integration", "biomass_caps",
                                               "solver", "reference", "sweep", "seed", "digest", "source"])
ScenarioConfig.__new__.__defaults__ = ((), 8, None, (), True, None, SolverOptions(), None, None, 0, None, None)
ScenarioConfig.__doc__ = """
Everything needed to build and solve the models of one scenario.

:param co2_caps: explicit ε values in kg CO2/yr
:param frozen_vars: (process, ANN input index) -> fixed value
:param disabled_processes: process ids whose binary is fixed to 0
:param biomass_caps: "total" or biomass component id -> kg/h
:param reference: fossil reference {cost_per_kg, emission_per_kg}
"""

ParetoPoint = namedtuple("ParetoPoint", ["cap", "objective", "emissions", "specific_cost",
                                         "specific_emissions", "active", "operating", "status", "gap",
                                         "kerosene"])
ParetoPoint.__doc__ = """
Result at one emission cap. The objective, emission and specific fields are
None when the solve found no feasible point.
"""

KeroseneReport = namedtuple("KeroseneReport", ["delta_kerosene", "delta_hc", "allocation", "lambda_kerosene",
                                               "emissions_kerosene", "cost_kerosene", "mass_kerosene",
                                               "specific_cost", "specific_emissions"])
KeroseneReport.__doc__ = """
Allocation of cost and emissions to the kerosene fraction of the product
stream. Ratios that would divide by zero are None.
"""


def _tuples(value):
    if isinstance(value, (list, tuple)):
        return tuple(_tuples(v) for v in value)
    return value


def _port(pid, direction, data):
    allowed = data.get("allowed", "all")
    return PortSpec(pid, direction, int(data["index"]), allowed if allowed == "all" else tuple(allowed),
                    bool(data.get("external", True)))


def spec_from_dict(data: dict) -> SuperstructureSpec:
    """
    Superstructure from an inline scenario table with ``components``,
    ``processes`` and ``connections``.

    :raises SpecError: malformed entry
    """
    try:
        comps = [ComponentSpec(c["id"], float(c["molar_mass"]), float(c.get("lhv", 0.0)), c.get("src_cost"),
                               c.get("src_emission"), frozenset(c.get("tags", ())), c.get("elements"),
                               float(c.get("combustion_co2", 0.0)))
                 for c in data.get("components", [])]
        processes = []
        for p in data.get("processes", []):
            pid = p["id"]
            if p.get("kind", "linear") == "linear":
                kind = Linear(dict(p.get("stoich", {})), p.get("key_component"), float(p.get("specific_work", 0.0)),
                              p.get("specific_capex"), p.get("capex_basis", "scale"))
            else:
                kind = Surrogate(p["network_id"], int(p["n_inputs"]), int(p["n_outputs"]),
                                 tuple(Binding(int(k), _tuples(q)) for k, q in p["input_bindings"]),
                                 tuple(Binding(int(k), _tuples(q)) for k, q in p["output_bindings"]),
                                 p.get("specific_capex"), p.get("capex_basis", "total-inlet-flow"),
                                 _tuples(p.get("output_names")))
            heat = [HeatPortSpec(pid, int(h["index"]), h["mode"], h.get("temperature"), h.get("temperature_input"),
                                 h.get("specific_duty"), float(h.get("duty_bound", 5.0)))
                    for h in p.get("heat_ports", [])]
            processes.append(ProcessSpec(pid, kind,
                                         [_port(pid, INLET, d) for d in p.get("inlet_ports", [])],
                                         [_port(pid, OUTLET, d) for d in p.get("outlet_ports", [])],
                                         heat, _tuples(p.get("purity", ())), _tuples(p.get("flow_ratios", ()))))
        return SuperstructureSpec(comps, processes, [tuple(c) for c in data.get("connections", [])])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError("malformed superstructure table: {}".format(exc))


def _globals(data):
    g = dict(data)
    for key in ("targets", "co2_terms"):
        if key in g:
            g[key] = _tuples(g[key])
    return g


def build_spec(scenario: ScenarioFile) -> SuperstructureSpec:
    """
    Superstructure of a scenario: built-in case or inline table, lumping,
    then global, process and component parameter overrides.

    :raises ConfigError: unknown case, lumping, process or parameter
    """
    head = section(scenario, "scenario")
    if "case" in head:
        cls = cases.reverse_lookup(head["case"])
        if cls is None:
            raise ConfigError("unknown case {}".format(head["case"]), scenario.path, key="scenario.case")
        spec = cls().spec
    elif "superstructure" in scenario.data:
        spec = spec_from_dict(scenario.data["superstructure"])
    else:
        raise ConfigError("scenario names neither a case nor a superstructure", scenario.path, key="scenario")
    if head.get("lumping"):
        try:
            spec = cases.lumped(spec, head["lumping"])
        except KeyError as exc:
            raise ConfigError(str(exc).strip("'\""), scenario.path, key="scenario.lumping")

    spec = spec.with_globals(**_globals(section(scenario, "globals")))

    processes = []
    params = section(scenario, "process_params")
    for pid in params:
        if not spec.has_process(pid):
            raise ConfigError("unknown process {}".format(pid), scenario.path, key="process_params." + pid)
    for process in spec.processes:
        fields = params.get(process.id, {})
        unknown = set(fields) - set(process.kind._fields)
        if unknown:
            raise ConfigError("unknown process parameter {}".format(sorted(unknown)[0]), scenario.path,
                              key="process_params.{}.{}".format(process.id, sorted(unknown)[0]))
        processes.append(process._replace(kind=process.kind._replace(**fields)) if fields else process)

    components = []
    params = section(scenario, "component_params")
    for cid in params:
        if not spec.has_component(cid):
            raise ConfigError("unknown component {}".format(cid), scenario.path, key="component_params." + cid)
    for comp in spec.components:
        fields = dict(params.get(comp.id, {}))
        unknown = set(fields) - set(ComponentSpec._fields)
        if unknown:
            raise ConfigError("unknown component parameter {}".format(sorted(unknown)[0]), scenario.path,
                              key="component_params.{}.{}".format(comp.id, sorted(unknown)[0]))
        if "tags" in fields:
            fields["tags"] = frozenset(fields["tags"])
        components.append(comp._replace(**fields) if fields else comp)
    return spec.replace(components=components, processes=processes)


def load_networks(scenario: ScenarioFile, spec: SuperstructureSpec) -> dict:
    """Networks keyed by network id; scenario keys may be process or network ids."""
    networks = {}
    for key, path in section(scenario, "networks").items():
        network_id = spec.process(key).kind.network_id if spec.has_process(key) else key
        networks[network_id] = load_network(resolve(scenario, path))
    return networks


def _input_index(spec, networks, pid, name):
    process = spec.process(pid)
    if not is_surrogate(process):
        raise ValueError("{} is not a surrogate process".format(pid))
    if str(name).isdigit():
        return int(name)
    net = networks.get(process.kind.network_id)
    if net is not None and net.input_names and name in net.input_names:
        return list(net.input_names).index(name)
    for b in process.kind.input_bindings:
        if b.quantity == ("op", name):
            return b.index
    raise ValueError("{} has no ANN input {}".format(pid, name))


def input_name(spec, networks, pid, k):
    net = networks.get(spec.process(pid).kind.network_id)
    if net is not None and net.input_names:
        return net.input_names[k]
    return str(k)


def resolve_frozen(spec, networks, frozen) -> dict:
    """
    ``{"Process.input": value}`` to ``{(process, index): value}``.

    :raises ConfigError: unknown process or input, or value outside the
        network input box
    """
    resolved = {}
    for key, value in frozen.items():
        pid, _, name = key.partition(".")
        dotted = "options.frozen_vars." + key
        try:
            k = _input_index(spec, networks, pid, name)
        except (KeyError, ValueError) as exc:
            raise ConfigError("cannot freeze {}: {}".format(key, exc), key=dotted)
        net = networks.get(spec.process(pid).kind.network_id)
        if net is not None:
            lo, hi = net.input_box
            if not lo[k] <= value <= hi[k]:
                raise ConfigError("frozen value {} of {} outside [{}, {}]".format(value, key, lo[k], hi[k]),
                                  key=dotted)
        resolved[(pid, k)] = float(value)
    return resolved


def from_scenario(scenario: ScenarioFile, networks=None) -> ScenarioConfig:
    """
    :param networks: additional networks by network id, e.g. freshly trained
        ones; networks listed in the scenario file take precedence
    :raises SpecError: superstructure does not validate
    """
    spec = build_spec(scenario)
    report = validate_superstructure(spec)
    if not report.ok:
        raise SpecError("superstructure does not validate:\n{}".format(report))
    networks = dict(networks or {}, **load_networks(scenario, spec))
    head = section(scenario, "scenario")
    options = section(scenario, "options")
    pareto = section(scenario, "pareto")
    for pid in options.get("disabled_processes", ()):
        if not spec.has_process(pid):
            raise ConfigError("unknown process {}".format(pid), scenario.path, key="options.disabled_processes")
    caps = tuple(math.inf if c in ("inf", None) else float(c) for c in pareto.get("caps", ()))
    return ScenarioConfig(
        name=head.get("name", "scenario"), spec=spec, networks=networks, co2_caps=caps,
        n_caps=int(pareto.get("n_caps", 8)),
        frozen_vars=resolve_frozen(spec, networks, options.get("frozen_vars", {})),
        disabled_processes=tuple(options.get("disabled_processes", ())),
        heat_integration=bool(options.get("heat_integration", True)),
        biomass_caps=dict(options.get("biomass_caps", {})),
        solver=SolverOptions(**section(scenario, "solver")),
        reference=section(scenario, "reference") or None,
        sweep=section(scenario, "sweep") or None,
        seed=int(head.get("seed", 0)), digest=scenario.digest, source=scenario)


def load_config(path, overrides=()) -> ScenarioConfig:
    return from_scenario(load_scenario(path, overrides))


def with_globals(cfg: ScenarioConfig, **kwargs) -> ScenarioConfig:
    return cfg._replace(spec=cfg.spec.with_globals(**kwargs))


def build_model(cfg: ScenarioConfig, cap: float = None):
    """
    Assemble the model of a scenario with its options applied: disabled
    processes, frozen ANN inputs, biomass caps and the emission cap
    ``M_CO2_tot <= cap``.
    """
    spec = cfg.spec
    model = assemble_model(spec, cfg.networks, cfg.heat_integration)
    for pid in cfg.disabled_processes:
        model.fix(("y", pid), 0.0)
    for (pid, k), value in sorted(cfg.frozen_vars.items()):
        model.add_constraint([(("ann_in", pid, k), 1.0)], EQ, value, ("frozen", pid, k))
    for key, cap_flow in sorted(cfg.biomass_caps.items()):
        comps = spec.tagged("biomass") if key == "total" else [key]
        terms = [(("Msrc", a, j, i), 1.0) for a in comps for j, i in spec.inlets()
                 if model.has_var(("Msrc", a, j, i))]
        model.add_constraint(terms, LE, float(cap_flow), ("biomass_cap", key))
    if cap is not None and math.isfinite(cap):
        model.add_constraint([(("M_CO2_tot",), 1.0)], LE, float(cap), ("co2_cap",))
    model.metadata["co2_cap"] = cap
    return model


def solve(cfg: ScenarioConfig, cap: float = None, warm_start=None, objective=None):
    """
    Build and solve one model.

    :param objective: variable label to minimize instead of the total cost
    :return: (model, solution)
    """
    model = build_model(cfg, cap)
    if objective is not None:
        model.set_objective({objective: 1.0})
    sol = solve_miqcp(model, cfg.solver._replace(warm_start=warm_start))
    return model, sol


def has_values(sol) -> bool:
    return sol.values is not None and sol.status in (OPTIMAL, FEASIBLE)


def product_mass(spec, model, values) -> float:
    """Annual production at the target ports, kg/yr."""
    tau = spec.globals["tau"]
    return tau * sum(model.get(values, ("Mout", pid, o)) for pid, o, _ in spec.globals["targets"])


def operating_point(cfg, model, values) -> dict:
    operating = OrderedDict()
    for process in cfg.spec.processes:
        if not is_surrogate(process):
            continue
        for k in range(process.kind.n_inputs):
            label = ("ann_in", process.id, k)
            if model.has_var(label):
                name = "{}.{}".format(process.id, input_name(cfg.spec, cfg.networks, process.id, k))
                operating[name] = model.value(values, label)
    return operating


def evaluate_point(cfg: ScenarioConfig, model, sol, cap=None) -> ParetoPoint:
    if not has_values(sol):
        return ParetoPoint(cap, None, None, None, None, [], {}, sol.status, sol.gap, None)
    spec, values = cfg.spec, sol.values
    emissions = model.value(values, ("M_CO2_tot",))
    active = [p.id for p in spec.processes if model.value(values, ("y", p.id)) > 0.5]
    kerosene = None
    if spec.globals["dominance"] is not None:
        kerosene = post_kerosene_metrics(values, model, spec, sol.objective)
    if kerosene is not None:
        specific_cost, specific_emissions = kerosene.specific_cost, kerosene.specific_emissions
    else:
        mass = product_mass(spec, model, values)
        specific_cost = sol.objective / mass if mass > 0 else UNDEFINED
        specific_emissions = emissions / mass if mass > 0 else UNDEFINED
    return ParetoPoint(cap, sol.objective, emissions, specific_cost, specific_emissions, active,
                       operating_point(cfg, model, values), sol.status, sol.gap, kerosene)


def default_caps(cfg: ScenarioConfig, n: int = None):
    """
    ``n`` caps from the emissions of the cost optimum down to the minimum
    emissions, spaced densely near the minimum.
    """
    n = n or cfg.n_caps
    _, free = solve(cfg)
    model, low = solve(cfg, objective=("M_CO2_tot",))
    if not has_values(free) or not has_values(low):
        logger.warning("cannot bracket emissions (status %s / %s), sweeping without cap", free.status, low.status)
        return [math.inf]
    e_max = model.value(free.values, ("M_CO2_tot",))
    e_min = model.value(low.values, ("M_CO2_tot",))
    if n == 1 or e_max <= e_min:
        return [e_max]
    g = np.geomspace(1.0, 1e-2, n)
    return [float(c) for c in e_min + (e_max - e_min) * (g - g[-1]) / (1.0 - g[-1])]


def pareto_sweep(cfg: ScenarioConfig, caps=None, workers: int = 1):
    """
    ε-constraint sweep: one solve per cap with ``M_CO2_tot <= cap``.

    Caps are processed in descending order. With one worker each solve is
    warm-started from the previous incumbent; with more workers the points
    solve concurrently. Infeasible caps and solver limits are recorded in the
    point status, the sweep always completes.

    :return: points ordered by descending cap
    """
    caps = list(caps if caps is not None else (cfg.co2_caps or default_caps(cfg)))
    caps = sorted(caps, reverse=True)

    def run(cap, warm=None):
        model, sol = solve(cfg, cap, warm)
        point = evaluate_point(cfg, model, sol, cap)
        logger.info("cap=%s status=%s objective=%s", cap, point.status, point.objective)
        return point, sol

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return [p for p, _ in pool.map(run, caps)]
    points, warm = [], None
    for cap in caps:
        point, sol = run(cap, warm)
        if has_values(sol):
            warm = sol.values
        points.append(point)
    return points


def kerosene_metrics(spec, w_out, w_sink, m_out, k_tot, m_co2_tot, purge_co=0.0) -> KeroseneReport:
    """
    Kerosene allocation from the product port composition.

    :param w_out: component -> mass fraction at the product outlet
    :param w_sink: component -> mass fraction of the sink flow of that outlet
    :param m_out: product outlet flow, kg/h
    :param k_tot: total annual cost, $/yr
    :param m_co2_tot: total annual emissions, kg/yr
    :param purge_co: CO in the purge sink flow, kg/h
    """
    tau = spec.globals["tau"]
    kero = spec.tagged("kerosene")
    hcs = spec.tagged("hydrocarbon")
    delta_k = sum(w_out.get(a, 0.0) * spec.component(a).lhv for a in kero)
    delta_hc = sum(w_out.get(a, 0.0) * spec.component(a).lhv for a in hcs)
    lam = sum(w_out.get(a, 0.0) * spec.component(a).combustion_co2 for a in kero)
    sink_share = sum(w_sink.get(a, 0.0) for a in kero)
    mass = tau * sink_share * m_out
    if delta_hc <= 0.0:
        logger.warning("no hydrocarbons in the product stream, kerosene allocation undefined")
        return KeroseneReport(delta_k, delta_hc, UNDEFINED, lam, UNDEFINED, UNDEFINED, mass, UNDEFINED, UNDEFINED)
    factor = dict((c, f) for c, f, _ in spec.globals["co2_terms"]).get("CO", CO_FACTOR)
    allocation = delta_k / delta_hc
    emissions = allocation * m_co2_tot + tau * lam * m_out + tau * sink_share * (factor * purge_co)
    cost = allocation * k_tot
    return KeroseneReport(delta_k, delta_hc, allocation, lam, emissions, cost, mass,
                          cost / mass if mass > 0 else UNDEFINED,
                          emissions / mass if mass > 0 else UNDEFINED)


def post_kerosene_metrics(values, model, spec, objective=None) -> KeroseneReport:
    """
    Kerosene allocation of a solution at the product port named by the
    dominance rule. CO in the purge outlet (dominance key ``purge``) is
    attributed to the kerosene in proportion to its sink fraction.
    """
    dominance = spec.globals["dominance"]
    if dominance is None:
        raise ValueError("superstructure has no product port (dominance rule)")
    pid, o = dominance["process"], dominance["port"]
    comps = spec.component_ids
    w_out = dict((a, model.get(values, ("w_out", a, pid, o))) for a in comps)
    w_sink = dict((a, model.get(values, ("w_sink", a, pid, o))) for a in comps)
    purge = dominance.get("purge")
    purge_co = 0.0
    if purge is not None:
        purge_co = model.get(values, ("w_sink", "CO", pid, purge)) * model.get(values, ("Msink", pid, purge))
    k_tot = objective if objective is not None else model.value(values, ("K_tot",))
    return kerosene_metrics(spec, w_out, w_sink, model.value(values, ("Mout", pid, o)), k_tot,
                            model.value(values, ("M_CO2_tot",)), purge_co)


def abatement_cost(k_green: float, k_ref: float, avoidance: float):
    """
    CO2 abatement cost in $/t CO2 from specific costs in $/t kerosene and the
    avoidance in t CO2 per t kerosene. None if nothing is avoided.
    """
    if avoidance <= 0.0:
        return UNDEFINED
    return (k_green - k_ref) / avoidance


def point_abatement(point: ParetoPoint, reference: dict):
    """Abatement cost of a point against a fossil reference given per kg."""
    if not reference or point.specific_cost is None or point.specific_emissions is None:
        return UNDEFINED
    return abatement_cost(1000.0 * point.specific_cost, 1000.0 * reference["cost_per_kg"],
                          reference["emission_per_kg"] - point.specific_emissions)


def cost_breakdown(values, model, spec) -> OrderedDict:
    """Annualized CAPEX per process and OPEX per source component, electricity and heat in $/yr."""
    cr = model.metadata["capital_recovery"]
    return OrderedDict([
        ("capex", OrderedDict((p.id, cr * model.value(values, ("K_cap", p.id))) for p in spec.processes)),
        ("components", OrderedDict((a, model.value(values, ("K_op_comp", a))) for a in spec.tagged("source"))),
        ("electricity", model.value(values, ("K_op_el",))),
        ("heat", model.value(values, ("K_op_heat",))),
        ("total", model.value(values, ("K_tot",))),
    ])


def source_flows(values, model, spec) -> OrderedDict:
    """
    Carbon and hydrogen entering with each source component (kg/h) and the
    carbon leaving through the sinks excluded from the CO2 balance.
    """
    flows = OrderedDict()
    for a in spec.tagged("source"):
        mass = sum(model.get(values, ("Msrc", a, j, i)) for j, i in spec.inlets())
        fractions = element_mass_fractions(spec.component(a))
        flows[a] = {"mass": mass, "C": mass * fractions.get("C", 0.0), "H": mass * fractions.get("H", 0.0)}
    stored = 0.0
    for cid, _, excluded in spec.globals["co2_terms"]:
        if cid == "CO2" and spec.has_component(cid):
            carbon = element_mass_fractions(spec.component(cid)).get("C", ATOMIC_MASS["C"] / 44.009)
            stored += sum(model.get(values, ("P_sink", cid, j, o)) for j, o in excluded) * carbon
    return OrderedDict([("sources", flows), ("sequestered_carbon", stored)])


def price_sweep(cfg: ScenarioConfig, parameter: str, values, workers: int = 1, cap=None):
    """
    Re-solve with one global (e.g. ``gamma_el``) set to each value.

    :return: list of (value, ParetoPoint) in the order of ``values``
    """
    if parameter not in cfg.spec.globals:
        raise ConfigError("unknown global {}".format(parameter), key="sweep.parameter")

    def run(value):
        c = with_globals(cfg, **{parameter: float(value)})
        model, sol = solve(c, cap)
        return float(value), evaluate_point(c, model, sol, cap)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(run, values))


def compare_fixed_adaptable(cfg: ScenarioConfig, prices, reference_price: float, parameter: str = "gamma_el",
                            workers: int = 1, cap=None):
    """
    Compare free operating variables against a fixed design that freezes all
    non-categorical ANN inputs at their values of the reference-price optimum.

    :return: list of dicts with price, adaptable and fixed points
    """
    ref_cfg = with_globals(cfg, **{parameter: float(reference_price)})
    model, sol = solve(ref_cfg, cap)
    if not has_values(sol):
        raise ValueError("reference solve at {} = {} is {}".format(parameter, reference_price, sol.status))
    frozen = dict(cfg.frozen_vars)
    for process in cfg.spec.processes:
        if not is_surrogate(process):
            continue
        for b in process.kind.input_bindings:
            if b.quantity[0] != "onehot":
                frozen[(process.id, b.index)] = model.value(sol.values, ("ann_in", process.id, b.index))
    fixed_cfg = cfg._replace(frozen_vars=frozen)
    adaptable = price_sweep(cfg, parameter, prices, workers, cap)
    fixed = price_sweep(fixed_cfg, parameter, prices, workers, cap)
    return [{"price": p, "adaptable": a, "fixed": f} for (p, a), (_, f) in zip(adaptable, fixed)]


def heat_integration_sensitivity(cfg: ScenarioConfig, heat_prices, workers: int = 1, cap=None):
    """Solve with heat integration on and off for every heat price."""
    on = price_sweep(cfg._replace(heat_integration=True), "gamma_heat", heat_prices, workers, cap)
    off = price_sweep(cfg._replace(heat_integration=False), "gamma_heat", heat_prices, workers, cap)
    return [{"price": p, "integrated": a, "standalone": b} for (p, a), (_, b) in zip(on, off)]


def plot_data(points) -> OrderedDict:
    """x/y series of specific emissions over specific cost and of cost over cap."""
    feasible = [p for p in points if p.objective is not None]
    specific = [p for p in feasible if p.specific_cost is not None and p.specific_emissions is not None]
    return OrderedDict([
        ("specific", {"x": [p.specific_cost for p in specific], "y": [p.specific_emissions for p in specific]}),
        ("cap", {"x": [_number(p.cap) for p in feasible], "y": [p.objective for p in feasible]}),
    ])


def _number(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _jsonable(value):
    if isinstance(value, dict):
        return OrderedDict((str(k), _jsonable(v)) for k, v in value.items())
    if hasattr(value, "_asdict"):
        return _jsonable(value._asdict())
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _number(value.item())
    return _number(value)


def provenance(cfg: ScenarioConfig) -> OrderedDict:
    return OrderedDict([("scenario", cfg.name), ("digest", cfg.digest), ("seed", cfg.seed)])


def write_json(data, path, cfg: ScenarioConfig = None):
    out = provenance(cfg) if cfg is not None else OrderedDict()
    out.update(_jsonable(data))
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


def solution_to_dict(cfg: ScenarioConfig, model, sol) -> OrderedDict:
    data = OrderedDict([("status", sol.status), ("objective", sol.objective), ("bound", sol.bound),
                        ("gap", sol.gap), ("nodes", sol.nodes),
                        ("verifier", sol.report._asdict() if sol.report is not None else None)])
    if has_values(sol):
        data["point"] = evaluate_point(cfg, model, sol, model.metadata.get("co2_cap"))
        data["values"] = OrderedDict((format_label(v.label), float(sol.values[v.id])) for v in model.vars)
    return data


CSV_COLUMNS = ["cap", "objective", "emissions", "specific_cost", "specific_emissions", "abatement_cost",
               "status", "gap", "active", "digest", "seed"]


def write_points_csv(points, path, cfg: ScenarioConfig):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p in points:
            row = [p.cap, p.objective, p.emissions, p.specific_cost, p.specific_emissions,
                   point_abatement(p, cfg.reference), p.status, p.gap, ";".join(p.active), cfg.digest, cfg.seed]
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


def infeasible(points) -> bool:
    return any(p.status == INFEASIBLE for p in points)
