# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Translation of a :class:`~safmodel.core_model.SuperstructureSpec` into a flat
algebraic model (:class:`ModelIR`).

Every constraint family is emitted by its own ``emit_*`` function into a
fragment. Fragments refer to variables by label, :func:`assemble_model`
merges them, assigns contiguous ids and checks that every bilinear factor is
bounded. Products are never relaxed here, they are only registered as
:class:`BilinearTerm` so the solver can decide how to treat them.
"""

import logging
import math
from collections import namedtuple, OrderedDict

from .core_model import (INLET, OUTLET, HOT, COLD, DUAL, SCALE_BASIS, is_linear, is_surrogate,
                         normalized_stoich, validate_superstructure)

logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
BINARY = "binary"

EXACT_BINARY = "exact-binary"
MCCORMICK = "mccormick-continuous"

LE = "<="
EQ = "="
GE = ">="

INF = math.inf

VarRef = namedtuple("VarRef", ["id", "kind", "lo", "hi", "label"])
Constraint = namedtuple("Constraint", ["coeffs", "sense", "rhs", "name"])
BilinearTerm = namedtuple("BilinearTerm", ["product_var", "factor_a", "factor_b", "exactness"])
BilinearTerm.__doc__ = """
Registry entry for ``product_var = factor_a * factor_b``. Factor bounds are
read from :attr:`ModelIR.vars` at solve time, the VarRefs stored here carry the
bounds at registration.
"""


class ModelConstructionError(Exception):
    """
    Raised when a superstructure cannot be turned into a model, e.g. missing key
    component, missing CAPEX basis or an unbounded bilinear factor.
    """


def format_label(label) -> str:
    """Human readable variable or constraint name, e.g. ``w_in(H2,AEC,1)``."""
    if len(label) == 1:
        return str(label[0])
    return "{}({})".format(label[0], ",".join(str(p) for p in label[1:]))


class ModelIR(object):
    """
    Flat optimization model: typed variables with bounds, linear constraints,
    registered bilinear products and a linear objective to minimize.

    Variables are addressed either by integer id or by their label tuple.
    Adding a variable under an existing label returns the existing variable
    with bounds intersected, which is how fragments share variables. A label
    used in a constraint or the objective before it is declared is registered
    as a free continuous variable.
    """
    def __init__(self):
        self.vars = []
        self.lin_constraints = []
        self.bilinears = []
        self.objective = {}
        self.objective_constant = 0.0
        self.metadata = {}
        self._index = {}

    def __len__(self):
        return len(self.vars)

    def add_var(self, label, kind=CONTINUOUS, lo=0.0, hi=INF) -> VarRef:
        if kind == BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        if label in self._index:
            old = self.vars[self._index[label]]
            kind = BINARY if BINARY in (kind, old.kind) else CONTINUOUS
            var = old._replace(kind=kind, lo=max(old.lo, lo), hi=min(old.hi, hi))
            self.vars[old.id] = var
            return var
        var = VarRef(len(self.vars), kind, float(lo), float(hi), label)
        self._index[label] = var.id
        self.vars.append(var)
        return var

    def has_var(self, label) -> bool:
        return label in self._index

    def var(self, label) -> VarRef:
        try:
            return self.vars[self._index[label]]
        except KeyError:
            raise KeyError("no variable {}".format(format_label(label)))

    def _id(self, ref):
        if isinstance(ref, VarRef):
            return ref.id
        if isinstance(ref, tuple):
            return self._index[ref]
        return int(ref)

    def _ref(self, ref):
        if isinstance(ref, tuple) and not isinstance(ref, VarRef) and ref not in self._index:
            return self.add_var(ref, CONTINUOUS, -INF, INF).id
        return self._id(ref)

    def set_bounds(self, ref, lo=None, hi=None) -> VarRef:
        var = self.vars[self._id(ref)]
        var = var._replace(lo=var.lo if lo is None else float(lo), hi=var.hi if hi is None else float(hi))
        self.vars[var.id] = var
        return var

    def fix(self, ref, value) -> VarRef:
        return self.set_bounds(ref, value, value)

    def add_constraint(self, coeffs, sense, rhs, name):
        """
        :param coeffs: iterable of (variable, coefficient) or mapping; variables
            as VarRef, label or id. Repeated variables are summed.
        """
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        merged = OrderedDict()
        for ref, c in items:
            vid = self._ref(ref)
            merged[vid] = merged.get(vid, 0.0) + float(c)
        merged = OrderedDict((k, v) for k, v in sorted(merged.items()) if v != 0.0)
        con = Constraint(merged, sense, float(rhs), tuple(name))
        self.lin_constraints.append(con)
        return con

    def add_bilinear(self, product, a, b) -> BilinearTerm:
        product, a, b = (self.vars[self._id(r)] for r in (product, a, b))
        exact = BINARY in (a.kind, b.kind)
        term = BilinearTerm(product, a, b, EXACT_BINARY if exact else MCCORMICK)
        self.bilinears.append(term)
        return term

    def set_objective(self, coeffs, constant=0.0):
        self.objective = OrderedDict((self._ref(r), float(c)) for r, c in coeffs.items() if c != 0.0)
        self.objective_constant = float(constant)

    def count(self, family: str) -> int:
        return sum(1 for c in self.lin_constraints if c.name[0] == family)

    def constraints(self, family: str):
        return [c for c in self.lin_constraints if c.name[0] == family]

    def value(self, values, label) -> float:
        return float(values[self._index[label]])

    def get(self, values, label, default=0.0) -> float:
        if label in self._index:
            return float(values[self._index[label]])
        return default

    def lower_bounds(self):
        return [v.lo for v in self.vars]

    def upper_bounds(self):
        return [v.hi for v in self.vars]

    def binaries(self):
        return [v.id for v in self.vars if v.kind == BINARY]

    def objective_value(self, values) -> float:
        return self.objective_constant + sum(c * values[i] for i, c in self.objective.items())

    def copy(self):
        other = ModelIR()
        other.vars = list(self.vars)
        other.lin_constraints = list(self.lin_constraints)
        other.bilinears = list(self.bilinears)
        other.objective = OrderedDict(self.objective)
        other.objective_constant = self.objective_constant
        other.metadata = dict(self.metadata)
        other._index = dict(self._index)
        return other

    def merge(self, fragment):
        """Merge a fragment into this model, unifying variables by label."""
        remap = {}
        for v in fragment.vars:
            remap[v.id] = self.add_var(v.label, v.kind, v.lo, v.hi).id
        for c in fragment.lin_constraints:
            self.lin_constraints.append(Constraint(OrderedDict(sorted((remap[i], a) for i, a in c.coeffs.items())),
                                                   c.sense, c.rhs, c.name))
        for t in fragment.bilinears:
            self.add_bilinear(remap[t.product_var.id], remap[t.factor_a.id], remap[t.factor_b.id])
        for i, c in fragment.objective.items():
            self.objective[remap[i]] = self.objective.get(remap[i], 0.0) + c
        self.objective_constant += fragment.objective_constant
        self.metadata.update(fragment.metadata)
        return self

    def refresh_bilinears(self):
        """Re-read factor VarRefs and reclassify after bounds or kinds changed."""
        terms, self.bilinears = self.bilinears, []
        for t in terms:
            self.add_bilinear(t.product_var.id, t.factor_a.id, t.factor_b.id)

    def __eq__(self, other):
        key = lambda t: (t.product_var.id, t.factor_a.id, t.factor_b.id, t.exactness)
        return (isinstance(other, ModelIR)
                and self.vars == other.vars
                and self.lin_constraints == other.lin_constraints
                and [key(t) for t in self.bilinears] == [key(t) for t in other.bilinears]
                and dict(self.objective) == dict(other.objective)
                and self.objective_constant == other.objective_constant)

    def __repr__(self):
        return "ModelIR({} vars, {} constraints, {} bilinears)".format(
            len(self.vars), len(self.lin_constraints), len(self.bilinears))


def capital_recovery(r: float, theta: float) -> float:
    """Capital recovery factor for interest rate ``r`` over ``theta`` years."""
    q = (1.0 + r) ** theta
    return r * q / (q - 1.0)


def _cap(spec):
    return float(spec.globals["flow_cap"])


def _bilinear(m, label, a, b):
    """Register ``label = a * b`` with product bounds from the factor boxes."""
    corners = [a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi]
    corners = [0.0 if math.isnan(c) else c for c in corners]
    z = m.add_var(label, CONTINUOUS, min(corners), max(corners))
    m.add_bilinear(z, a, b)
    return z


def _source_allowed(spec, pid, index, cid):
    port = spec.port(pid, INLET, index)
    return port.external and "source" in spec.component(cid).tags


def emit_mass_balances(spec) -> ModelIR:
    """
    Port and process mass balances: total and component balances at every
    inlet and outlet, splitter composition equalities, zero-source constraints
    and process mass conservation. Flows through a port are additionally
    gated by the process binary.
    """
    m = ModelIR()
    F = _cap(spec)
    comps = spec.component_ids

    for c in spec.connections:
        key = tuple(c)
        allowed = set(spec.allowed(c.source, OUTLET, c.outlet)) & set(spec.allowed(c.target, INLET, c.inlet))
        flow = m.add_var(("Mflow",) + key, CONTINUOUS, 0.0, F)
        for a in comps:
            w = m.add_var(("w_conn", a) + key, CONTINUOUS, 0.0, 1.0 if a in allowed else 0.0)
            _bilinear(m, ("Pflow", a) + key, w, flow)

    for process in spec.processes:
        j = process.id
        y = m.add_var(("y", j), BINARY)
        n_in, n_out = len(process.inlet_ports), len(process.outlet_ports)

        for port in process.inlet_ports:
            i = port.index
            allowed = set(spec.allowed(j, INLET, i))
            conns = [tuple(c) for c in spec.connections_into(j, i)]
            M = m.add_var(("Min", j, i), CONTINUOUS, 0.0, F)
            m.add_constraint([(M, 1.0)] + [(("Mflow",) + c, -1.0) for c in conns]
                             + [(m.add_var(("Msrc", a, j, i), CONTINUOUS, 0.0,
                                           F if a in allowed and _source_allowed(spec, j, i, a) else 0.0), -1.0)
                                for a in comps],
                             EQ, 0.0, ("inlet_total", j, i))
            for a in comps:
                w = m.add_var(("w_in", a, j, i), CONTINUOUS, 0.0, 1.0 if a in allowed else 0.0)
                P = _bilinear(m, ("P_in", a, j, i), w, M)
                m.add_constraint([(P, 1.0), (("Msrc", a, j, i), -1.0)]
                                 + [(("Pflow", a) + c, -1.0) for c in conns],
                                 EQ, 0.0, ("inlet_partial", a, j, i))
                if "source" not in spec.component(a).tags:
                    m.add_constraint([(("Msrc", a, j, i), 1.0)], EQ, 0.0, ("source_zero", a, j, i))
            m.add_constraint([(M, 1.0), (y, -F)], LE, 0.0, ("flow_activation", "in", j, i))

        for port in process.outlet_ports:
            o = port.index
            conns = [tuple(c) for c in spec.connections_from(j, o)]
            M = m.add_var(("Mout", j, o), CONTINUOUS, 0.0, F)
            sink = m.add_var(("Msink", j, o), CONTINUOUS, 0.0, F if port.external else 0.0)
            m.add_constraint([(M, 1.0), (sink, -1.0)] + [(("Mflow",) + c, -1.0) for c in conns],
                             EQ, 0.0, ("outlet_total", j, o))
            allowed = set(spec.allowed(j, OUTLET, o))
            for a in comps:
                hi = 1.0 if a in allowed else 0.0
                w = m.add_var(("w_out", a, j, o), CONTINUOUS, 0.0, hi)
                P = _bilinear(m, ("P_out", a, j, o), w, M)
                ws = m.add_var(("w_sink", a, j, o), CONTINUOUS, 0.0, hi)
                Ps = _bilinear(m, ("P_sink", a, j, o), ws, sink)
                m.add_constraint([(P, 1.0), (Ps, -1.0)] + [(("Pflow", a) + c, -1.0) for c in conns],
                                 EQ, 0.0, ("outlet_partial", a, j, o))
                for c in conns:
                    m.add_constraint([(("w_conn", a) + c, 1.0), (w, -1.0)], EQ, 0.0, ("splitter", a) + c)
                m.add_constraint([(ws, 1.0), (w, -1.0)], EQ, 0.0, ("sink_composition", a, j, o))
            m.add_constraint([(M, 1.0), (y, -F)], LE, 0.0, ("flow_activation", "out", j, o))

        Min = m.add_var(("Min_tot", j), CONTINUOUS, 0.0, F * max(n_in, 1))
        Mout = m.add_var(("Mout_tot", j), CONTINUOUS, 0.0, F * max(n_out, 1))
        m.add_constraint([(Min, 1.0)] + [(("Min", j, p.index), -1.0) for p in process.inlet_ports],
                         EQ, 0.0, ("process_inlet_total", j))
        m.add_constraint([(Mout, 1.0)] + [(("Mout", j, p.index), -1.0) for p in process.outlet_ports],
                         EQ, 0.0, ("process_outlet_total", j))
        for a in comps:
            w = m.add_var(("w_in_tot", a, j), CONTINUOUS, 0.0, 1.0)
            P = _bilinear(m, ("P_in_tot", a, j), w, Min)
            m.add_constraint([(P, 1.0)] + [(("P_in", a, j, p.index), -1.0) for p in process.inlet_ports],
                             EQ, 0.0, ("process_inlet_partial", a, j))
            w = m.add_var(("w_out_tot", a, j), CONTINUOUS, 0.0, 1.0)
            P = _bilinear(m, ("P_out_tot", a, j), w, Mout)
            m.add_constraint([(P, 1.0)] + [(("P_out", a, j, p.index), -1.0) for p in process.outlet_ports],
                             EQ, 0.0, ("process_outlet_partial", a, j))
        m.add_constraint([(Mout, 1.0), (Min, -1.0)], EQ, 0.0, ("process_conservation", j))
    return m


def emit_conversion_and_scale(spec) -> ModelIR:
    """
    Stoichiometric conversion and process scale of linear processes, scale of
    surrogate processes (total inlet flow) and the mass-fraction sums tied to
    the process binaries.

    :raises ModelConstructionError: linear process with a stoichiometry but no
        produced key component
    """
    m = ModelIR()
    F = _cap(spec)
    comps = spec.component_ids
    for process in spec.processes:
        j = process.id
        y = m.add_var(("y", j), BINARY)
        n_out = max(len(process.outlet_ports), 1)
        n_in = max(len(process.inlet_ports), 1)
        if is_linear(process) and process.kind.stoich:
            kind = process.kind
            if kind.key_component is None or kind.stoich.get(kind.key_component, 0.0) <= 0:
                raise ModelConstructionError("{} has no produced key component".format(j))
            nu = normalized_stoich(kind)
            gamma = m.add_var(("Gamma", j), CONTINUOUS, 0.0, F * n_out)
            for a in comps:
                terms = [(("P_out_tot", a, j), 1.0), (("P_in_tot", a, j), -1.0)]
                if nu.get(a, 0.0):
                    terms.append((gamma, -nu[a]))
                m.add_constraint(terms, EQ, 0.0, ("conversion", a, j))
            m.add_constraint([(gamma, 1.0), (("P_out_tot", kind.key_component, j), -1.0)],
                             EQ, 0.0, ("scale", j))
        else:
            gamma = m.add_var(("Gamma", j), CONTINUOUS, 0.0, F * n_in)
            if is_linear(process):
                for a in comps:
                    m.add_constraint([(("P_out_tot", a, j), 1.0), (("P_in_tot", a, j), -1.0)],
                                     EQ, 0.0, ("conversion", a, j))
            m.add_constraint([(gamma, 1.0), (("Min_tot", j), -1.0)], EQ, 0.0, ("scale", j))

        for port in process.inlet_ports:
            m.add_constraint([(("w_in", a, j, port.index), 1.0) for a in comps] + [(y, -1.0)],
                             EQ, 0.0, ("fraction_sum_inlet", j, port.index))
        for port in process.outlet_ports:
            m.add_constraint([(("w_out", a, j, port.index), 1.0) for a in comps] + [(y, -1.0)],
                             EQ, 0.0, ("fraction_sum_outlet", j, port.index))
            for c in spec.connections_from(j, port.index):
                m.add_constraint([(("w_conn", a) + tuple(c), 1.0) for a in comps] + [(y, -1.0)],
                                 EQ, 0.0, ("fraction_sum_connection",) + tuple(c))
        if process.inlet_ports:
            m.add_constraint([(("w_in_tot", a, j), 1.0) for a in comps] + [(y, -1.0)],
                             EQ, 0.0, ("fraction_sum_inlet_total", j))
        if process.outlet_ports:
            m.add_constraint([(("w_out_tot", a, j), 1.0) for a in comps] + [(y, -1.0)],
                             EQ, 0.0, ("fraction_sum_outlet_total", j))
    return m


def _surrogate_output_bound(spec, process, networks, quantity, default):
    """Largest magnitude of the ANN outputs bound to ``quantity``."""
    if networks is None or process.kind.network_id not in networks:
        return default
    from .surrogate import output_bounds
    lo, hi = output_bounds(networks[process.kind.network_id])
    idx = [b.index for b in process.kind.output_bindings if b.quantity == quantity]
    if not idx:
        return default
    return sum(max(abs(lo[k]), abs(hi[k])) for k in idx)


def _process_scale_max(spec, process):
    F = _cap(spec)
    if is_linear(process) and process.kind.stoich:
        return F * max(len(process.outlet_ports), 1)
    return F * max(len(process.inlet_ports), 1)


def emit_energy_balance(spec, networks=None) -> ModelIR:
    """
    Process work (``W = e * Gamma`` for linear processes, ANN output for
    surrogates) and the network power balance with external supply and export.
    """
    m = ModelIR()
    total = 0.0
    terms = []
    for process in spec.processes:
        j = process.id
        scale = _process_scale_max(spec, process)
        if is_linear(process):
            e = float(process.kind.specific_work)
            bound = abs(e) * scale
            W = m.add_var(("W", j), CONTINUOUS, min(0.0, e * scale), max(0.0, e * scale))
            m.add_constraint([(W, 1.0), (("Gamma", j), -e)], EQ, 0.0, ("work_linear", j))
        elif any(b.quantity == ("work",) for b in process.kind.output_bindings):
            bound = _surrogate_output_bound(spec, process, networks, ("work",), 10.0) * scale
            W = m.add_var(("W", j), CONTINUOUS, -bound, bound)
        else:
            bound = 0.0
            W = m.add_var(("W", j), CONTINUOUS, 0.0, 0.0)
        total += bound
        terms.append((W, 1.0))
    if not spec.processes:
        return m
    Wsrc = m.add_var(("Wsrc",), CONTINUOUS, 0.0, total)
    Wsink = m.add_var(("Wsink",), CONTINUOUS, 0.0, total)
    m.add_constraint(terms + [(Wsrc, 1.0), (Wsink, -1.0)], EQ, 0.0, ("power_balance",))
    return m


def _duty_range(spec, process, port, networks):
    """Attainable (lo, hi) of the duty of one heat port, kW."""
    scale = _process_scale_max(spec, process)
    if is_linear(process):
        q = float(port.specific_duty)
        return min(0.0, q * scale), max(0.0, q * scale)
    bound = _surrogate_output_bound(spec, process, networks, ("duty", port.index), port.duty_bound) * scale
    if port.mode == HOT:
        return 0.0, bound
    if port.mode == COLD:
        return -bound, 0.0
    return -bound, bound


def heat_big_m(spec, networks=None) -> float:
    """Big-M for heat flows: sum of the largest duty of all hot and dual ports."""
    if spec.globals["big_m_heat"] is not None:
        return float(spec.globals["big_m_heat"])
    total = 0.0
    for pid, port in spec.hot_ports():
        total += _duty_range(spec, spec.process(pid), port, networks)[1]
    return max(total, 1.0)


def _temperature(m, spec, pid, port):
    """Fixed temperature value, or the ANN input variable carrying it."""
    if port.temperature_input is None:
        return float(port.temperature), None
    return None, m.add_var(("ann_in", pid, port.temperature_input), CONTINUOUS, -200.0, 1600.0)


def emit_heat_integration(spec, networks=None, heat_integration=True) -> ModelIR:
    """
    Heat port duties, hot/cold port balances, gated heat flows between hot and
    cold ports with minimum temperature approach, the dual-mode port and the
    self-integration ban.

    With ``heat_integration=False`` every heat flow between ports is fixed to
    zero, so all cold duty comes from external supply.

    :raises ModelConstructionError: dual-mode port on a process other than the
        configured dual-port process
    """
    m = ModelIR()
    hot = spec.hot_ports()
    cold = spec.cold_ports()
    if not hot and not cold:
        return m
    M = heat_big_m(spec, networks)
    dt = float(spec.globals["dt_min"])
    for pid, port in spec.heat_ports():
        if port.mode == DUAL and pid != spec.globals["dual_port_process"]:
            raise ModelConstructionError("dual heat port declared on {}".format(pid))

    for pid, port in spec.heat_ports():
        process = spec.process(pid)
        lo, hi = _duty_range(spec, process, port, networks)
        Q = m.add_var(("Q", pid, port.index), CONTINUOUS, lo, hi)
        if is_linear(process):
            m.add_constraint([(Q, 1.0), (("Gamma", pid), -float(port.specific_duty))],
                             EQ, 0.0, ("duty_linear", pid, port.index))

    flows_out = OrderedDict(((pid, p.index), []) for pid, p in hot)
    flows_in = OrderedDict(((pid, p.index), []) for pid, p in cold)
    for hid, hport in hot:
        th, th_var = _temperature(m, spec, hid, hport)
        for cid, cport in cold:
            key = (hid, hport.index, cid, cport.index)
            flow = m.add_var(("Qflow",) + key, CONTINUOUS, 0.0, M if heat_integration else 0.0)
            z = m.add_var(("z_heat",) + key, BINARY)
            flows_out[(hid, hport.index)].append(flow)
            flows_in[(cid, cport.index)].append(flow)
            m.add_constraint([(flow, 1.0), (z, -M)], LE, 0.0, ("heat_link",) + key)
            m.add_constraint([(z, 1.0), (("y", hid), -1.0)], LE, 0.0, ("heat_link_active", "hot") + key)
            m.add_constraint([(z, 1.0), (("y", cid), -1.0)], LE, 0.0, ("heat_link_active", "cold") + key)
            tc, tc_var = _temperature(m, spec, cid, cport)
            terms = [(z, dt)]
            if tc_var is None:
                terms.append((z, tc))
            else:
                terms.append((_bilinear(m, ("zT", "cold") + key, z, tc_var), 1.0))
            if th_var is None:
                terms.append((z, -th))
            else:
                terms.append((_bilinear(m, ("zT", "hot") + key, z, th_var), -1.0))
            m.add_constraint(terms, LE, 0.0, ("heat_dt",) + key)
            if not heat_integration:
                m.add_constraint([(flow, 1.0)], EQ, 0.0, ("heat_integration_off",) + key)
            if hid == cid and hport.index == cport.index:
                m.add_constraint([(z, 1.0)], EQ, 0.0, ("self_integration_ban",) + key)

    for pid, port in spec.heat_ports():
        k = (pid, port.index)
        Q = m.var(("Q",) + k)
        if port.mode == DUAL:
            zs = m.add_var(("z_src_sink",) + k, BINARY)
            zQ = _bilinear(m, ("zQ",) + k, zs, Q)
            sink = m.add_var(("Qsink",) + k, CONTINUOUS, 0.0, M)
            src = m.add_var(("Qsrc",) + k, CONTINUOUS, 0.0, M)
            m.add_constraint([(f, 1.0) for f in flows_out[k]] + [(sink, 1.0), (zQ, -1.0)],
                             EQ, 0.0, ("heat_balance_dual_hot",) + k)
            m.add_constraint([(f, 1.0) for f in flows_in[k]] + [(src, 1.0), (Q, 1.0), (zQ, -1.0)],
                             EQ, 0.0, ("heat_balance_dual_cold",) + k)
            m.add_constraint([(Q, 1.0), (zs, -M)], LE, 0.0, ("dual_mode", "source") + k)
            m.add_constraint([(Q, -1.0), (zs, M)], LE, M, ("dual_mode", "sink") + k)
        elif port.mode == HOT:
            sink = m.add_var(("Qsink",) + k, CONTINUOUS, 0.0, M)
            m.add_constraint([(f, 1.0) for f in flows_out[k]] + [(sink, 1.0), (Q, -1.0)],
                             EQ, 0.0, ("heat_balance_hot",) + k)
        else:
            src = m.add_var(("Qsrc",) + k, CONTINUOUS, 0.0, M)
            m.add_constraint([(f, 1.0) for f in flows_in[k]] + [(src, 1.0), (Q, 1.0)],
                             EQ, 0.0, ("heat_balance_cold",) + k)
    return m


def _heat_supply_terms(spec):
    return [("Qsrc", pid, p.index) for pid, p in spec.cold_ports()]


def emit_economics(spec) -> ModelIR:
    """
    Annualized CAPEX per process, OPEX for sourced components, electricity and
    heat, and the objective ``K_tot = CR * sum(K_cap) + sum(K_op)``.

    :raises ModelConstructionError: process without CAPEX basis
    """
    m = ModelIR()
    if not spec.processes:
        return m
    g = spec.globals
    tau = float(g["tau"])
    cr = capital_recovery(float(g["r"]), float(g["theta"]))
    total = [(m.add_var(("K_tot",), CONTINUOUS, -INF, INF), 1.0)]

    for process in spec.processes:
        j = process.id
        beta = process.kind.specific_capex
        if beta is None:
            raise ModelConstructionError("{} has no CAPEX basis".format(j))
        basis = ("Gamma", j) if process.kind.capex_basis == SCALE_BASIS else ("Min_tot", j)
        K = m.add_var(("K_cap", j), CONTINUOUS, -INF, INF)
        m.add_constraint([(K, 1.0), (basis, -float(beta))], EQ, 0.0, ("capex", j))
        total.append((K, -cr))

    for a in spec.tagged("source"):
        comp = spec.component(a)
        ports = [(j, i) for j, i in spec.inlets() if _source_allowed(spec, j, i, a)
                 and a in spec.allowed(j, INLET, i)]
        K = m.add_var(("K_op_comp", a), CONTINUOUS, -INF, INF)
        m.add_constraint([(K, 1.0)] + [(("Msrc", a, j, i), -tau * comp.src_cost) for j, i in ports],
                         EQ, 0.0, ("opex_component", a))
        total.append((K, -1.0))

    K = m.add_var(("K_op_el",), CONTINUOUS, -INF, INF)
    m.add_constraint([(K, 1.0), (("Wsrc",), -tau * float(g["gamma_el"]))], EQ, 0.0, ("opex_electricity",))
    total.append((K, -1.0))
    K = m.add_var(("K_op_heat",), CONTINUOUS, -INF, INF)
    m.add_constraint([(K, 1.0)] + [(t, -tau * float(g["gamma_heat"])) for t in _heat_supply_terms(spec)],
                     EQ, 0.0, ("opex_heat",))
    total.append((K, -1.0))

    m.add_constraint(total, EQ, 0.0, ("total_cost",))
    m.set_objective({("K_tot",): 1.0})
    m.metadata["cost"] = ("K_tot",)
    m.metadata["capital_recovery"] = cr
    return m


def emit_co2_accounting(spec) -> ModelIR:
    """
    CO2 balance: supply-chain emissions of sourced components, CO2 leaving
    through sinks (CO and CH4 counted on complete oxidation, with the
    configured port exclusions), electricity and heat supply. The total is
    exposed as the variable ``M_CO2_tot`` for emission caps.
    """
    m = ModelIR()
    if not spec.processes:
        return m
    g = spec.globals
    tau = float(g["tau"])
    total = [(m.add_var(("M_CO2_tot",), CONTINUOUS, -INF, INF), 1.0)]

    for a in spec.tagged("source"):
        comp = spec.component(a)
        ports = [(j, i) for j, i in spec.inlets() if _source_allowed(spec, j, i, a)
                 and a in spec.allowed(j, INLET, i)]
        E = m.add_var(("M_CO2_src", a), CONTINUOUS, -INF, INF)
        m.add_constraint([(E, 1.0)] + [(("Msrc", a, j, i), -tau * comp.src_emission) for j, i in ports],
                         EQ, 0.0, ("co2_source", a))
        total.append((E, -1.0))

    sink = m.add_var(("M_CO2_sink",), CONTINUOUS, -INF, INF)
    terms = [(sink, 1.0)]
    for cid, factor, excluded in g["co2_terms"]:
        if not spec.has_component(cid):
            continue
        excluded = set(tuple(e) for e in excluded)
        for j, o in spec.outlets():
            if (j, o) not in excluded:
                terms.append((("P_sink", cid, j, o), -tau * float(factor)))
    m.add_constraint(terms, EQ, 0.0, ("co2_sink",))
    total.append((sink, -1.0))

    total.append((("Wsrc",), -tau * float(g["lambda_el"])))
    total.extend((t, -tau * float(g["lambda_heat"])) for t in _heat_supply_terms(spec))
    m.add_constraint(total, EQ, 0.0, ("co2_total",))
    m.metadata["emissions"] = ("M_CO2_tot",)
    return m


def emit_process_rules(spec) -> ModelIR:
    """
    Purity equalities (electrolysis feeds and products), production targets,
    kerosene dominance over gasoline and diesel, fixed inlet flow ratios and
    the allowed-component restrictions of the ports.
    """
    m = ModelIR()
    comps = spec.component_ids
    for process in spec.processes:
        j = process.id
        for direction, index, cid in process.purity:
            w = ("w_in", cid, j, index) if direction == INLET else ("w_out", cid, j, index)
            m.add_constraint([(w, 1.0), (("y", j), -1.0)], EQ, 0.0, ("purity", direction, cid, j, index))
        for num, den, ratio in process.flow_ratios:
            m.add_constraint([(("Min", j, num), 1.0), (("Min", j, den), -float(ratio))],
                             EQ, 0.0, ("flow_ratio", j, num, den))
        for direction, ports, prefix in ((INLET, process.inlet_ports, "w_in"),
                                         (OUTLET, process.outlet_ports, "w_out")):
            for port in ports:
                allowed = set(spec.allowed(j, direction, port.index))
                for a in comps:
                    if a not in allowed:
                        m.add_constraint([((prefix, a, j, port.index), 1.0)], EQ, 0.0,
                                         ("allowed_components", direction, a, j, port.index))

    for pid, index, flow in spec.globals["targets"]:
        m.add_constraint([(("Mout", pid, index), 1.0)], EQ, float(flow), ("production_target", pid, index))

    dominance = spec.globals["dominance"]
    if dominance is not None:
        pid, o = dominance["process"], dominance["port"]
        kero = [(("w_out", a, pid, o), -1.0) for a in spec.tagged("kerosene")]
        water = [(("w_out", dominance["water"], pid, o), 1.0)] if spec.has_component(dominance["water"]) else []
        for tag in ("gasoline", "diesel"):
            other = [(("w_out", a, pid, o), 1.0) for a in spec.tagged(tag)]
            m.add_constraint(other + water + kero, LE, 0.0, ("kerosene_dominance", tag))
    return m


def emit_surrogate_links(spec, networks) -> ModelIR:
    """
    Embed the ReLU network of every surrogate process and link it to the model:
    inputs to inlet compositions, flow ratios, operating variables and the
    one-hot feedstock binaries; outputs to outlet compositions
    (``w_out = y * f``), outlet splits, duties and work (scaled by the total
    inlet flow). ANN input variables always stay inside the network input box.

    :raises ModelConstructionError: missing network or binding arity mismatch
    """
    from .surrogate import encode_relu_milp, output_bounds

    m = ModelIR()
    tol = float(spec.globals["surrogate_link_tol"])
    for process in spec.processes:
        if not is_surrogate(process):
            continue
        j = process.id
        kind = process.kind
        if networks is None or kind.network_id not in networks:
            raise ModelConstructionError("no network registered for {} ({})".format(j, kind.network_id))
        net = networks[kind.network_id]
        if net.n_inputs != kind.n_inputs or net.n_outputs != kind.n_outputs:
            raise ModelConstructionError("binding arity mismatch for {}: network {}x{}, bindings {}x{}".format(
                j, net.n_inputs, net.n_outputs, kind.n_inputs, kind.n_outputs))
        if net.output_names and getattr(kind, "output_names", None) and \
                tuple(net.output_names) != tuple(kind.output_names):
            raise ModelConstructionError("output names of network {} do not match {}".format(net.name, j))

        y = m.add_var(("y", j), BINARY)
        lo, hi = net.input_box
        inputs = [m.add_var(("ann_in", j, k), CONTINUOUS, lo[k], hi[k]) for k in range(net.n_inputs)]
        olo, ohi = output_bounds(net)
        outputs = [m.add_var(("ann_out", j, k), CONTINUOUS, olo[k], ohi[k]) for k in range(net.n_outputs)]
        m.merge(encode_relu_milp(net, inputs, outputs, prefix=("ann", j)))
        Min = m.add_var(("Min_tot", j), CONTINUOUS, 0.0, _cap(spec) * max(len(process.inlet_ports), 1))

        onehot = []
        for b in kind.input_bindings:
            a = m.var(("ann_in", j, b.index))
            q = b.quantity
            if q[0] == "w_in":
                yx = _bilinear(m, ("y_ann_in", j, b.index), y, a)
                m.add_constraint([(("w_in", q[2], j, q[1]), 1.0), (yx, -1.0)], EQ, 0.0,
                                 ("surrogate_input", j, b.index))
            elif q[0] == "op":
                op = m.add_var(("op", j, q[1]), CONTINUOUS, a.lo, a.hi)
                m.add_constraint([(op, 1.0), (a, -1.0)], EQ, 0.0, ("surrogate_input", j, b.index))
            elif q[0] == "ratio":
                r = _bilinear(m, ("ratio_flow", j, b.index), a, m.add_var(("Min", j, q[2]), CONTINUOUS, 0.0, _cap(spec)))
                m.add_constraint([(("Min", j, q[1]), 1.0), (r, -1.0)], EQ, 0.0, ("surrogate_ratio", j, b.index))
            elif q[0] == "onehot":
                x = m.add_var(("x", j, q[1]), BINARY)
                onehot.append(x)
                m.add_constraint([(a, 1.0), (x, -1.0)], EQ, 0.0, ("onehot", "input", j, b.index))
                m.add_constraint([(("w_in", q[1], j, q[2]), 1.0), (x, -1.0)], EQ, 0.0, ("onehot", "feed", j, q[1]))
        if onehot:
            m.add_constraint([(x, 1.0) for x in onehot] + [(y, -1.0)], EQ, 0.0, ("onehot_sum", j))

        grouped = OrderedDict()
        for b in kind.output_bindings:
            if b.quantity[0] != "ignore":
                grouped.setdefault(b.quantity, []).append(b.index)
        for q, indices in grouped.items():
            if q[0] == "w_out":
                terms = [(_bilinear(m, ("y_ann_out", j, k), y, m.var(("ann_out", j, k))), -1.0) for k in indices]
                w = ("w_out", q[2], j, q[1])
                if tol > 0.0:
                    m.add_constraint([(w, 1.0), (y, tol)] + terms, GE, 0.0, ("surrogate_output", "lower", j) + q[1:])
                    m.add_constraint([(w, 1.0), (y, -tol)] + terms, LE, 0.0, ("surrogate_output", "upper", j) + q[1:])
                else:
                    m.add_constraint([(w, 1.0)] + terms, EQ, 0.0, ("surrogate_output", j) + q[1:])
                continue
            terms = [(_bilinear(m, ("flow_ann_out", j, k), m.var(("ann_out", j, k)), Min), -1.0) for k in indices]
            if q[0] == "split":
                target = ("Mout", j, q[1])
            elif q[0] == "duty":
                target = ("Q", j, q[1])
            else:
                target = ("W", j)
            m.add_constraint([(target, 1.0)] + terms, EQ, 0.0, ("surrogate_output", j) + q)
    return m


def assemble_model(spec, networks=None, heat_integration=True) -> ModelIR:
    """
    Build the complete model of a superstructure.

    :param spec: Superstructure, must validate cleanly
    :param networks: network id -> :class:`~safmodel.surrogate.ReluNetwork`
    :param heat_integration: False fixes all heat flows between ports to zero
    :return: Complete model with contiguous variable ids
    :raises ModelConstructionError: invalid spec, missing network or an
        unbounded bilinear factor
    """
    if not spec.processes:
        return ModelIR()
    report = validate_superstructure(spec)
    if not report.ok:
        raise ModelConstructionError("superstructure does not validate:\n{}".format(report))
    model = ModelIR()
    for fragment in (emit_mass_balances(spec),
                     emit_conversion_and_scale(spec),
                     emit_energy_balance(spec, networks),
                     emit_heat_integration(spec, networks, heat_integration),
                     emit_economics(spec),
                     emit_co2_accounting(spec),
                     emit_process_rules(spec)):
        model.merge(fragment)
    if any(is_surrogate(p) for p in spec.processes):
        model.merge(emit_surrogate_links(spec, networks))
    model.refresh_bilinears()

    for t in model.bilinears:
        for v in (t.factor_a, t.factor_b):
            if not (math.isfinite(v.lo) and math.isfinite(v.hi)):
                raise ModelConstructionError("bilinear factor {} is unbounded".format(format_label(v.label)))
    model.metadata["heat_integration"] = heat_integration
    logger.info("assembled %r", model)
    return model
