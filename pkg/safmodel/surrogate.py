# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
ReLU regression networks with standardization: forward evaluation, interval
bound propagation and the exact big-M MILP encoding used to embed a network
into a :class:`~safmodel.algebra.ModelIR`.
"""

import json
import logging
from collections import namedtuple

import numpy as np
from scipy.optimize import linprog

from .algebra import ModelIR, BINARY, CONTINUOUS, EQ, LE

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

RELU = "relu"
IDENTITY = "identity"

Layer = namedtuple("Layer", ["W", "b", "activation"])
NeuronBounds = namedtuple("NeuronBounds", ["lower", "upper"])
NeuronBounds.__doc__ = """
Pre-activation bounds of the hidden neurons in scaled units, one array per
hidden layer.
"""

DEFAULT_HIDDEN_WIDTHS = {"gasifier": 24, "rwgs": 16, "ft": 24}


class NetworkFormatError(Exception):
    """Network file or parameters violate the documented schema."""
    def __init__(self, message, path=None):
        self.message = message
        self.path = path

    def __str__(self):
        if self.path is None:
            return self.message
        return "{}: {}".format(self.path, self.message)


class ReluNetwork(object):
    """
    Feed-forward network with ReLU hidden layers and an identity output layer,
    operating on standardized inputs and outputs.

    :param layers: list of :class:`Layer`, ``W`` with shape (n_out, n_in)
    :param input_scaler: (mean, std) arrays of the inputs
    :param output_scaler: (mean, std) arrays of the outputs
    :param input_box: (lower, upper) arrays in raw input units
    :raises NetworkFormatError: dimensions do not chain, std not positive or
        activations not ReLU/identity
    """
    def __init__(self, layers, input_scaler, output_scaler, input_box,
                 input_names=None, output_names=None, name="net", metadata=None):
        self.layers = [Layer(np.array(l.W, dtype=float, ndmin=2), np.array(l.b, dtype=float).ravel(),
                             l.activation) for l in layers]
        self.input_mean, self.input_std = (np.asarray(a, dtype=float).ravel() for a in input_scaler)
        self.output_mean, self.output_std = (np.asarray(a, dtype=float).ravel() for a in output_scaler)
        self.input_box = tuple(np.asarray(a, dtype=float).ravel() for a in input_box)
        self.input_names = list(input_names) if input_names is not None else []
        self.output_names = list(output_names) if output_names is not None else []
        self.name = name
        self.metadata = dict(metadata or {})
        self._bounds = None
        self._check()

    def _check(self):
        if not self.layers:
            raise NetworkFormatError("network has no layers")
        n = self.layers[0].W.shape[1]
        for k, layer in enumerate(self.layers):
            if layer.W.shape[1] != n:
                raise NetworkFormatError("layer {} expects {} inputs, previous layer gives {}".format(
                    k, layer.W.shape[1], n))
            if layer.b.shape != (layer.W.shape[0],):
                raise NetworkFormatError("layer {} bias has {} entries for {} neurons".format(
                    k, layer.b.size, layer.W.shape[0]))
            if layer.activation not in (RELU, IDENTITY):
                raise NetworkFormatError("layer {} activation {} not supported".format(k, layer.activation))
            n = layer.W.shape[0]
        if self.layers[-1].activation != IDENTITY:
            raise NetworkFormatError("output layer must be identity")
        if any(l.activation != RELU for l in self.layers[:-1]):
            raise NetworkFormatError("hidden layers must be relu")
        for what, arrays, size in (("input scaler", (self.input_mean, self.input_std), self.n_inputs),
                                   ("output scaler", (self.output_mean, self.output_std), self.n_outputs),
                                   ("input box", self.input_box, self.n_inputs)):
            if any(a.shape != (size,) for a in arrays):
                raise NetworkFormatError("{} does not have {} entries".format(what, size))
        if not (np.all(self.input_std > 0) and np.all(self.output_std > 0)):
            raise NetworkFormatError("scaler std must be positive")
        if np.any(self.input_box[0] > self.input_box[1]):
            raise NetworkFormatError("input box lower bound exceeds upper bound")
        for names, size in ((self.input_names, self.n_inputs), (self.output_names, self.n_outputs)):
            if names and len(names) != size:
                raise NetworkFormatError("{} names given for {} features".format(len(names), size))

    @property
    def n_inputs(self):
        return self.layers[0].W.shape[1]

    @property
    def n_outputs(self):
        return self.layers[-1].W.shape[0]

    @property
    def hidden_widths(self):
        return [l.W.shape[0] for l in self.layers[:-1]]

    def scaled_box(self):
        lo, hi = self.input_box
        return (lo - self.input_mean) / self.input_std, (hi - self.input_mean) / self.input_std

    def __eq__(self, other):
        if not isinstance(other, ReluNetwork) or len(self.layers) != len(other.layers):
            return False
        arrays = lambda n: ([a for l in n.layers for a in (l.W, l.b)] +
                            [n.input_mean, n.input_std, n.output_mean, n.output_std] + list(n.input_box))
        return (all(np.array_equal(a, b) for a, b in zip(arrays(self), arrays(other)))
                and [l.activation for l in self.layers] == [l.activation for l in other.layers]
                and self.input_names == other.input_names and self.output_names == other.output_names)

    def __repr__(self):
        return "ReluNetwork({}: {}-{}-{})".format(self.name, self.n_inputs,
                                                 "-".join(str(w) for w in self.hidden_widths), self.n_outputs)


def forward(net: ReluNetwork, x, with_flag=False):
    """
    Evaluate the network in raw units: scale, affine + ReLU per hidden layer,
    affine output layer, descale.

    :param x: input vector, or a (samples, inputs) matrix
    :param with_flag: also return whether any input lies outside the box
    :raises ValueError: wrong input dimension
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != net.n_inputs:
        raise ValueError("network {} takes {} inputs, got {}".format(net.name, net.n_inputs, X.shape[1]))
    lo, hi = net.input_box
    outside = bool(np.any(X < lo) or np.any(X > hi))
    if outside:
        logger.warning("input outside the training box of %s", net.name)
    h = (X - net.input_mean) / net.input_std
    for layer in net.layers:
        h = h @ layer.W.T + layer.b
        if layer.activation == RELU:
            h = np.maximum(h, 0.0)
    y = h * net.output_std + net.output_mean
    if single:
        y = y[0]
    return (y, outside) if with_flag else y


def _interval_affine(W, b, lo, hi):
    Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
    return b + Wp @ lo + Wn @ hi, b + Wp @ hi + Wn @ lo


def propagate_bounds(net: ReluNetwork) -> NeuronBounds:
    """
    Interval bounds on the pre-activations of all hidden neurons over the
    scaled input box. Sound for every input inside the box.
    """
    if net._bounds is not None:
        return net._bounds
    lo, hi = net.scaled_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise NetworkFormatError("input box of {} is not finite".format(net.name))
    lower, upper = [], []
    for layer in net.layers[:-1]:
        L, U = _interval_affine(layer.W, layer.b, lo, hi)
        lower.append(L)
        upper.append(U)
        lo, hi = np.maximum(L, 0.0), np.maximum(U, 0.0)
    net._bounds = NeuronBounds(lower, upper)
    return net._bounds


def output_bounds(net: ReluNetwork, bounds: NeuronBounds = None):
    """Raw-unit (lower, upper) arrays of the network outputs over the input box."""
    bounds = bounds or propagate_bounds(net)
    if bounds.lower:
        lo, hi = np.maximum(bounds.lower[-1], 0.0), np.maximum(bounds.upper[-1], 0.0)
    else:
        lo, hi = net.scaled_box()
    out = net.layers[-1]
    L, U = _interval_affine(out.W, out.b, lo, hi)
    return L * net.output_std + net.output_mean, U * net.output_std + net.output_mean


def refine_bounds_lp(net: ReluNetwork, bounds: NeuronBounds = None) -> NeuronBounds:
    """
    Tighten the pre-activation bounds of deeper hidden layers by solving two
    LPs per neuron over the triangle relaxation of the preceding layers. First
    layer bounds are exact already and kept.
    """
    bounds = bounds or propagate_bounds(net)
    lower, upper = [bounds.lower[0].copy()], [bounds.upper[0].copy()]
    box_lo, box_hi = net.scaled_box()
    for k in range(1, len(net.layers) - 1):
        # variables: scaled input, then (pre, post) per hidden layer before k
        sizes = [net.n_inputs] + [2 * w for w in net.hidden_widths[:k]]
        n = sum(sizes)
        A_eq, b_eq, A_ub, b_ub = [], [], [], []
        var_lo, var_hi = list(box_lo), list(box_hi)
        prev, offset = list(range(net.n_inputs)), net.n_inputs
        for l in range(k):
            W, b = net.layers[l].W, net.layers[l].b
            width = W.shape[0]
            pre = list(range(offset, offset + width))
            post = list(range(offset + width, offset + 2 * width))
            var_lo += list(lower[l]) + [max(0.0, v) for v in lower[l]]
            var_hi += list(upper[l]) + [max(0.0, v) for v in upper[l]]
            for i in range(width):
                row = np.zeros(n)
                row[prev] = W[i]
                row[pre[i]] = -1.0
                A_eq.append(row)
                b_eq.append(-b[i])
                L, U = lower[l][i], upper[l][i]
                row = np.zeros(n)
                if L >= 0:
                    row[post[i]], row[pre[i]] = 1.0, -1.0
                    A_eq.append(row)
                    b_eq.append(0.0)
                elif U <= 0:
                    var_hi[post[i]] = 0.0
                else:
                    row[pre[i]], row[post[i]] = 1.0, -1.0
                    A_ub.append(row)
                    b_ub.append(0.0)
                    row = np.zeros(n)
                    row[post[i]], row[pre[i]] = 1.0, -U / (U - L)
                    A_ub.append(row)
                    b_ub.append(-U * L / (U - L))
            prev, offset = post, offset + 2 * width
        W, b = net.layers[k].W, net.layers[k].b
        lk, uk = bounds.lower[k].copy(), bounds.upper[k].copy()
        for i in range(W.shape[0]):
            c = np.zeros(n)
            c[prev] = W[i]
            for sign in (1.0, -1.0):
                res = linprog(sign * c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                              A_eq=np.array(A_eq), b_eq=b_eq, bounds=list(zip(var_lo, var_hi)), method="highs")
                if res.status != 0:
                    continue
                value = sign * res.fun + b[i]
                if sign > 0:
                    lk[i] = max(lk[i], value)
                else:
                    uk[i] = min(uk[i], value)
        lower.append(lk)
        upper.append(uk)
    return NeuronBounds(lower, upper)


def _declare(m, ref):
    if hasattr(ref, "label"):
        return m.add_var(ref.label, ref.kind, ref.lo, ref.hi)
    return m.add_var(tuple(ref), CONTINUOUS, -np.inf, np.inf)


def encode_relu_milp(net: ReluNetwork, input_vars, output_vars, prefix=("ann",), bounds=None) -> ModelIR:
    """
    Exact MILP encoding of ``output = forward(net, input)``.

    Works in standardized units: scaled inputs are tied to the raw input
    variables by affine equalities, each unstable hidden neuron gets a binary
    activation variable and the four big-M inequalities, stably active neurons
    a single equality and stably inactive neurons are fixed to zero. Outputs
    are descaled by affine equalities.

    :param input_vars: VarRefs (or labels) of the raw network inputs
    :param output_vars: VarRefs (or labels) of the raw network outputs
    :param prefix: label prefix of the auxiliary variables
    :param bounds: pre-activation bounds, propagated if not given
    :return: Model fragment
    """
    bounds = bounds or propagate_bounds(net)
    if len(bounds.lower) != len(net.layers) - 1:
        raise NetworkFormatError("missing neuron bounds for {}".format(net.name))
    prefix = tuple(prefix)
    m = ModelIR()
    xs = [_declare(m, r) for r in input_vars]
    ys = [_declare(m, r) for r in output_vars]
    if len(xs) != net.n_inputs or len(ys) != net.n_outputs:
        raise NetworkFormatError("{} expects {} inputs and {} outputs".format(net.name, net.n_inputs, net.n_outputs))

    slo, shi = net.scaled_box()
    prev = []
    for k, x in enumerate(xs):
        s = m.add_var(prefix + ("scaled_in", k), CONTINUOUS, slo[k], shi[k])
        m.add_constraint([(x, 1.0), (s, -net.input_std[k])], EQ, net.input_mean[k], prefix + ("scale_in", k))
        prev.append(s)

    stable = 0
    for l, layer in enumerate(net.layers[:-1]):
        hidden = []
        for i in range(layer.W.shape[0]):
            L, U = bounds.lower[l][i], bounds.upper[l][i]
            h = m.add_var(prefix + ("h", l, i), CONTINUOUS, 0.0, max(U, 0.0))
            affine = [(p, -w) for p, w in zip(prev, layer.W[i])]
            name = prefix + ("relu", l, i)
            if L >= 0:
                m.add_constraint([(h, 1.0)] + affine, EQ, layer.b[i], name + ("active",))
                stable += 1
            elif U <= 0:
                m.add_constraint([(h, 1.0)], EQ, 0.0, name + ("inactive",))
                stable += 1
            else:
                eps = m.add_var(prefix + ("eps", l, i), BINARY)
                m.add_constraint([(h, -1.0)], LE, 0.0, name + ("nonneg",))
                m.add_constraint([(h, -1.0)] + [(p, -c) for p, c in affine], LE, -layer.b[i], name + ("lower",))
                m.add_constraint([(h, 1.0), (eps, -L)] + affine, LE, layer.b[i] - L, name + ("upper",))
                m.add_constraint([(h, 1.0), (eps, -U)], LE, 0.0, name + ("gate",))
            hidden.append(h)
        prev = hidden

    out = net.layers[-1]
    for k, y in enumerate(ys):
        std = net.output_std[k]
        m.add_constraint([(y, 1.0)] + [(p, -std * w) for p, w in zip(prev, out.W[k])],
                         EQ, std * out.b[k] + net.output_mean[k], prefix + ("scale_out", k))
    logger.debug("encoded %r, %d of %d hidden neurons stable", net, stable, sum(net.hidden_widths))
    return m


def network_to_dict(net: ReluNetwork) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "input_names": list(net.input_names),
        "output_names": list(net.output_names),
        "input_scaler": {"mean": net.input_mean.tolist(), "std": net.input_std.tolist()},
        "output_scaler": {"mean": net.output_mean.tolist(), "std": net.output_std.tolist()},
        "input_box": {"lower": net.input_box[0].tolist(), "upper": net.input_box[1].tolist()},
        "layers": [{"in": l.W.shape[1], "out": l.W.shape[0], "activation": l.activation,
                    "weights": l.W.tolist(), "bias": l.b.tolist()} for l in net.layers],
        "metadata": net.metadata,
    }


def network_from_dict(data: dict, path=None) -> ReluNetwork:
    """
    :raises NetworkFormatError: missing fields, unknown format version or
        inconsistent dimensions
    """
    try:
        if data["format_version"] != FORMAT_VERSION:
            raise NetworkFormatError("unsupported format_version {}".format(data["format_version"]), path)
        layers = []
        for k, entry in enumerate(data["layers"]):
            W = np.array(entry["weights"], dtype=float, ndmin=2)
            if W.shape != (entry["out"], entry["in"]):
                raise NetworkFormatError("layer {} weights are {}x{}, declared {}x{}".format(
                    k, W.shape[0], W.shape[1], entry["out"], entry["in"]), path)
            layers.append(Layer(W, entry["bias"], entry["activation"]))
        return ReluNetwork(layers,
                           (data["input_scaler"]["mean"], data["input_scaler"]["std"]),
                           (data["output_scaler"]["mean"], data["output_scaler"]["std"]),
                           (data["input_box"]["lower"], data["input_box"]["upper"]),
                           data.get("input_names"), data.get("output_names"),
                           data.get("name", "net"), data.get("metadata"))
    except KeyError as e:
        raise NetworkFormatError("missing field {}".format(e), path)
    except NetworkFormatError as e:
        e.path = e.path or path
        raise


def save_network(net: ReluNetwork, path):
    """Write a network as JSON. Floats are written with round-trip precision."""
    with open(path, "w") as f:
        json.dump(network_to_dict(net), f, indent=1)


def load_network(path) -> ReluNetwork:
    with open(path) as f:
        try:
            data = json.load(f)
        except ValueError as e:
            raise NetworkFormatError("not a JSON document ({})".format(e), path)
    return network_from_dict(data, path)
