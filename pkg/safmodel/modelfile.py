# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Model files: CPLEX-style lp-text and free MPS with QCMATRIX sections, so the
same model can be handed to an external MIQCP solver.

Variables are written as ``x<id>`` and linear rows as ``c<k>``, products as
quadratic rows ``qb<k>: x_z - [ x_a * x_b ] = 0``. Labels, constraint names,
the objective constant and the model metadata travel in comment lines, which
lets :func:`read_model` rebuild an identical :class:`~safmodel.algebra.ModelIR`.
Numbers are written with ``repr`` and therefore round-trip exactly.
"""

import json
import logging
import math

from .algebra import ModelIR, BINARY, CONTINUOUS, EQ, GE, LE

logger = logging.getLogger(__name__)

LP_HEADER = "\\ safmodel lp-text"
MPS_HEADER = "* safmodel mps"

_SENSES = {LE: "<=", EQ: "=", GE: ">="}
_MPS_SENSES = {LE: "L", EQ: "E", GE: "G"}


class ModelFileError(Exception):
    """Raised when a model file cannot be parsed."""
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        self.message = message

    def __str__(self):
        return "{}:{}: {}".format(self.path, self.lineno, self.message)


def _num(v):
    if v == math.inf:
        return "+infinity"
    if v == -math.inf:
        return "-infinity"
    return repr(float(v))


def _parse_num(s):
    if s in ("+infinity", "infinity", "+inf", "inf"):
        return math.inf
    if s in ("-infinity", "-inf"):
        return -math.inf
    return float(s)


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _comments(model, prefix):
    yield "{} vars={} constraints={} bilinears={}".format(
        prefix, len(model.vars), len(model.lin_constraints), len(model.bilinears))
    yield "{} objective_constant {}".format(prefix, repr(float(model.objective_constant)))
    yield "{} metadata {}".format(prefix, json.dumps(model.metadata, sort_keys=True))
    for v in model.vars:
        yield "{} var x{} {}".format(prefix, v.id, json.dumps(list(v.label)))
    for k, c in enumerate(model.lin_constraints):
        yield "{} row c{} {}".format(prefix, k, json.dumps(list(c.name)))
    for k, t in enumerate(model.bilinears):
        yield "{} bilinear qb{} {}".format(prefix, k, t.exactness)


def _terms(coeffs):
    out = []
    for i, a in coeffs.items():
        out.append("{} {} x{}".format("-" if a < 0 else "+", repr(abs(float(a))), i))
    return " ".join(out) if out else "0 x0"


def write_lp(model: ModelIR) -> str:
    lines = [LP_HEADER]
    lines.extend(_comments(model, "\\"))
    lines.append("Minimize")
    lines.append(" obj: {}".format(_terms(model.objective) if model.objective else "0"))
    lines.append("Subject To")
    for k, c in enumerate(model.lin_constraints):
        lines.append(" c{}: {} {} {}".format(k, _terms(c.coeffs), _SENSES[c.sense], repr(float(c.rhs))))
    for k, t in enumerate(model.bilinears):
        lines.append(" qb{}: + 1.0 x{} - [ x{} * x{} ] = 0.0".format(
            k, t.product_var.id, t.factor_a.id, t.factor_b.id))
    lines.append("Bounds")
    for v in model.vars:
        if v.lo == -math.inf and v.hi == math.inf:
            lines.append(" x{} free".format(v.id))
        else:
            lines.append(" {} <= x{} <= {}".format(_num(v.lo), v.id, _num(v.hi)))
    binaries = [v.id for v in model.vars if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join("x{}".format(i) for i in binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_mps(model: ModelIR) -> str:
    lines = [MPS_HEADER]
    lines.extend(_comments(model, "*"))
    lines.append("NAME safmodel")
    lines.append("ROWS")
    lines.append(" N obj")
    for k, c in enumerate(model.lin_constraints):
        lines.append(" {} c{}".format(_MPS_SENSES[c.sense], k))
    for k in range(len(model.bilinears)):
        lines.append(" E qb{}".format(k))

    columns = {v.id: [] for v in model.vars}
    for i, a in model.objective.items():
        columns[i].append(("obj", a))
    for k, c in enumerate(model.lin_constraints):
        for i, a in c.coeffs.items():
            columns[i].append(("c{}".format(k), a))
    for k, t in enumerate(model.bilinears):
        columns[t.product_var.id].append(("qb{}".format(k), 1.0))

    lines.append("COLUMNS")
    for v in model.vars:
        entries = columns[v.id] or [("obj", 0.0)]
        if v.kind == BINARY:
            lines.append("    MARKER 'MARKER' 'INTORG'")
        for row, a in entries:
            lines.append("    x{} {} {}".format(v.id, row, repr(float(a))))
        if v.kind == BINARY:
            lines.append("    MARKER 'MARKER' 'INTEND'")

    lines.append("RHS")
    if model.objective_constant:
        lines.append("    rhs obj {}".format(repr(-float(model.objective_constant))))
    for k, c in enumerate(model.lin_constraints):
        if c.rhs != 0.0:
            lines.append("    rhs c{} {}".format(k, repr(float(c.rhs))))

    lines.append("BOUNDS")
    for v in model.vars:
        if v.lo == v.hi:
            lines.append(" FX bnd x{} {}".format(v.id, repr(v.lo)))
            continue
        lines.append(" MI bnd x{}".format(v.id) if v.lo == -math.inf else " LO bnd x{} {}".format(v.id, repr(v.lo)))
        lines.append(" PL bnd x{}".format(v.id) if v.hi == math.inf else " UP bnd x{} {}".format(v.id, repr(v.hi)))

    for k, t in enumerate(model.bilinears):
        lines.append("QCMATRIX qb{}".format(k))
        a, b = t.factor_a.id, t.factor_b.id
        if a == b:
            lines.append("    x{} x{} -1.0".format(a, b))
        else:
            lines.append("    x{} x{} -0.5".format(a, b))
            lines.append("    x{} x{} -0.5".format(b, a))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def write_model(model: ModelIR, path, format="lp"):
    """
    :param format: "lp" (lp-text) or "mps"
    :raises ValueError: unknown format
    """
    if format not in ("lp", "mps"):
        raise ValueError("unknown model file format {}".format(format))
    text = write_lp(model) if format == "lp" else write_mps(model)
    with open(path, "w", newline="\n") as f:
        f.write(text)
    logger.info("wrote %r to %s", model, path)


class _Reader(object):
    """Collects the pieces of a model file and assembles the ModelIR."""
    def __init__(self, path):
        self.path = path
        self.labels = {}
        self.names = {}
        self.metadata = {}
        self.constant = 0.0
        self.kinds = {}
        self.lo = {}
        self.hi = {}
        self.rows = {}
        self.row_order = []
        self.products = {}
        self.product_order = []
        self.objective = {}

    def comment(self, lineno, text):
        parts = text.split(" ", 2)
        if parts[0] == "var":
            self.labels[int(parts[1][1:])] = _tupled(json.loads(parts[2]))
        elif parts[0] == "row":
            self.names[parts[1]] = _tupled(json.loads(parts[2]))
        elif parts[0] == "objective_constant":
            self.constant = float(parts[1])
        elif parts[0] == "metadata":
            self.metadata = {k: _tupled(v) for k, v in json.loads(text.split(" ", 1)[1]).items()}

    def fail(self, lineno, message):
        raise ModelFileError(self.path, lineno, message)

    def build(self) -> ModelIR:
        m = ModelIR()
        for i in sorted(self.labels):
            m.add_var(self.labels[i], self.kinds.get(i, CONTINUOUS), self.lo.get(i, 0.0), self.hi.get(i, math.inf))
        for row in self.row_order:
            coeffs, sense, rhs = self.rows[row]
            m.add_constraint(coeffs, sense, rhs, self.names[row])
        for row in self.product_order:
            z, a, b = self.products[row]
            m.add_bilinear(z, a, b)
        m.set_objective(self.objective, self.constant)
        m.metadata = self.metadata
        return m


def _var(reader, lineno, token):
    if not token.startswith("x"):
        reader.fail(lineno, "expected a variable, got {}".format(token))
    return int(token[1:])


def _parse_terms(reader, lineno, tokens):
    coeffs = []
    k = 0
    while k < len(tokens):
        sign = -1.0 if tokens[k] == "-" else 1.0
        coeffs.append((_var(reader, lineno, tokens[k + 2]), sign * float(tokens[k + 1])))
        k += 3
    return coeffs


def _read_lp(reader, lines):
    section = None
    for lineno, line in lines:
        if line.startswith("\\"):
            reader.comment(lineno, line[2:])
            continue
        stripped = line.strip()
        if stripped in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
            section = stripped
            continue
        if section == "Minimize":
            body = stripped.split(":", 1)[1].split()
            if body != ["0"]:
                reader.objective = dict(_parse_terms(reader, lineno, body))
        elif section == "Subject To":
            name, body = stripped.split(":", 1)
            tokens = body.split()
            if name.startswith("qb"):
                reader.products[name] = (_var(reader, lineno, tokens[2]), _var(reader, lineno, tokens[5]),
                                         _var(reader, lineno, tokens[7]))
                reader.product_order.append(name)
                continue
            sense = {v: k for k, v in _SENSES.items()}[tokens[-2]]
            terms = tokens[:-2]
            coeffs = [] if terms == ["0", "x0"] else _parse_terms(reader, lineno, terms)
            reader.rows[name] = (coeffs, sense, float(tokens[-1]))
            reader.row_order.append(name)
        elif section == "Bounds":
            tokens = stripped.split()
            if tokens[-1] == "free":
                i = _var(reader, lineno, tokens[0])
                reader.lo[i], reader.hi[i] = -math.inf, math.inf
            else:
                i = _var(reader, lineno, tokens[2])
                reader.lo[i], reader.hi[i] = _parse_num(tokens[0]), _parse_num(tokens[4])
        elif section == "Binaries":
            for token in stripped.split():
                reader.kinds[_var(reader, lineno, token)] = BINARY
        elif stripped:
            reader.fail(lineno, "unexpected line {!r}".format(stripped))


def _read_mps(reader, lines):
    section = None
    senses = {}
    integer = False
    qrow = None
    for lineno, line in lines:
        if line.startswith("*"):
            reader.comment(lineno, line[2:])
            continue
        tokens = line.split()
        if not tokens:
            continue
        if not line[0].isspace():
            section = tokens[0]
            if section == "QCMATRIX":
                qrow = tokens[1]
                reader.products.setdefault(qrow, [None, None, None])
                reader.product_order.append(qrow)
            continue
        if section == "ROWS":
            if tokens[0] != "N":
                senses[tokens[1]] = {v: k for k, v in _MPS_SENSES.items()}[tokens[0]]
                if tokens[1].startswith("c"):
                    reader.rows[tokens[1]] = ([], senses[tokens[1]], 0.0)
                    reader.row_order.append(tokens[1])
        elif section == "COLUMNS":
            if tokens[0] == "MARKER":
                integer = tokens[2] == "'INTORG'"
                continue
            i = _var(reader, lineno, tokens[0])
            if integer:
                reader.kinds[i] = BINARY
            row, a = tokens[1], float(tokens[2])
            if row == "obj":
                if a != 0.0:
                    reader.objective[i] = a
            elif row.startswith("qb"):
                reader.products.setdefault(row, [None, None, None])[0] = i
            else:
                reader.rows[row][0].append((i, a))
        elif section == "RHS":
            if tokens[1] != "obj":
                coeffs, sense, _ = reader.rows[tokens[1]]
                reader.rows[tokens[1]] = (coeffs, sense, float(tokens[2]))
        elif section == "BOUNDS":
            kind, i = tokens[0], _var(reader, lineno, tokens[2])
            if kind == "FX":
                reader.lo[i] = reader.hi[i] = float(tokens[3])
            elif kind == "LO":
                reader.lo[i] = float(tokens[3])
            elif kind == "UP":
                reader.hi[i] = float(tokens[3])
            elif kind == "MI":
                reader.lo[i] = -math.inf
            elif kind == "PL":
                reader.hi[i] = math.inf
        elif section == "QCMATRIX":
            entry = reader.products[qrow]
            if entry[1] is None:
                entry[1], entry[2] = _var(reader, lineno, tokens[0]), _var(reader, lineno, tokens[1])
        else:
            reader.fail(lineno, "unexpected line {!r}".format(line.strip()))


def read_model(path) -> ModelIR:
    """
    Read an lp-text or MPS file written by :func:`write_model`.

    :raises ModelFileError: not a model file of this package or malformed
    """
    reader = _Reader(path)
    with open(path) as f:
        lines = list(enumerate(f.read().splitlines(), 1))
    if not lines:
        raise ModelFileError(path, 1, "empty file")
    header = lines[0][1]
    if header == LP_HEADER:
        _read_lp(reader, lines[1:])
    elif header == MPS_HEADER:
        _read_mps(reader, lines[1:])
    else:
        raise ModelFileError(path, 1, "not a safmodel model file")
    try:
        return reader.build()
    except (KeyError, IndexError) as e:
        raise ModelFileError(path, len(lines), "inconsistent model file ({})".format(e))
