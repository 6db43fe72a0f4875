# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Scenario files: loading (JSON or TOML), schema check, ``key=value``
overrides and the scenario hash embedded in every artifact.
"""

import copy
import hashlib
import json
import logging
import os
import re
import sys
from collections import namedtuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core_model import DEFAULT_GLOBALS

logger = logging.getLogger(__name__)

FREE = "free"


class ConfigError(Exception):
    """
    Unparsable scenario file, unknown key or malformed override. ``key`` is
    the dotted path of the offending entry.
    """
    def __init__(self, message, path=None, line=None, key=None):
        self.message = message
        self.path = path
        self.line = line
        self.key = key

    def __str__(self):
        where = ""
        if self.path is not None:
            where = "{}:".format(self.path)
            if self.line is not None:
                where += "{}:".format(self.line)
            where += " "
        return where + self.message


ScenarioFile = namedtuple("ScenarioFile", ["data", "path", "digest"])
ScenarioFile.__doc__ = """
Effective scenario configuration after overrides. ``path`` is None for
scenarios built in memory.
"""


def _fields(names):
    return dict((n, None) for n in names)


def schema() -> dict:
    """
    Allowed keys of a scenario file. A dict is a table with fixed keys,
    :data:`FREE` a table with arbitrary keys, None a plain value.
    """
    from .oracles import get_oracles
    from .solver import SolverOptions
    from .trainer import TrainConfig

    oracles = [o.name for o in get_oracles()]
    data = dict((name, _fields(["n", "include_extremes", "workers", "seed"])) for name in oracles)
    train = _fields(TrainConfig._fields)
    train.update((name, _fields(TrainConfig._fields)) for name in oracles)
    return {
        "scenario": _fields(["name", "case", "lumping", "seed", "description"]),
        "superstructure": FREE,
        "globals": _fields(DEFAULT_GLOBALS),
        "process_params": FREE,
        "component_params": FREE,
        "networks": FREE,
        "data": data,
        "train": train,
        "solver": _fields(SolverOptions._fields),
        "options": {"heat_integration": None, "disabled_processes": None,
                    "frozen_vars": FREE, "biomass_caps": FREE},
        "pareto": _fields(["caps", "n_caps"]),
        "sweep": _fields(["parameter", "values", "fixed_reference"]),
        "reference": _fields(["cost_per_kg", "emission_per_kg"]),
    }


def _locate(text, key):
    """1-based line of the first definition of ``key`` in TOML or JSON text."""
    if text is None:
        return None
    pattern = re.compile(r'^\s*(\[+\s*([\w.-]+\.)?{0}\s*\]+|"?{0}"?\s*[=:])|"{0}"\s*:'.format(re.escape(key)))
    for lineno, line in enumerate(text.splitlines(), 1):
        if pattern.search(line):
            return lineno
    return None


def check_keys(data, tree=None, prefix=(), path=None, text=None):
    """
    :raises ConfigError: key not in the schema, naming its dotted path
    """
    tree = schema() if tree is None else tree
    if tree == FREE or tree is None:
        return
    if not isinstance(data, dict):
        raise ConfigError("{} must be a table".format(".".join(prefix) or "scenario"), path, key=".".join(prefix))
    for key, value in data.items():
        dotted = ".".join(prefix + (key,))
        if key not in tree:
            raise ConfigError("unknown key {}".format(dotted), path, _locate(text, key), dotted)
        if isinstance(tree[key], dict) or tree[key] == FREE:
            if not isinstance(value, dict):
                raise ConfigError("{} must be a table".format(dotted), path, _locate(text, key), dotted)
            check_keys(value, tree[key], prefix + (key,), path, text)


def parse_override(text: str):
    """
    Split ``a.b.c=value`` into the key path and the value. The value is parsed
    as JSON when possible, else kept as string.

    :raises ConfigError: no ``=`` or empty key
    """
    if "=" not in text:
        raise ConfigError("override {!r} is not of the form key=value".format(text))
    key, raw = text.split("=", 1)
    keys = tuple(k.strip() for k in key.split("."))
    if not all(keys):
        raise ConfigError("override {!r} has an empty key".format(text))
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return keys, value


def apply_override(data: dict, keys, value, tree=None):
    tree = schema() if tree is None else tree
    node = data
    for depth, key in enumerate(keys):
        dotted = ".".join(keys[:depth + 1])
        if tree != FREE:
            if tree is None or key not in tree:
                raise ConfigError("unknown key {}".format(dotted), key=dotted)
            tree = tree[key]
        if depth == len(keys) - 1:
            node[key] = value
        else:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError("{} is not a table".format(dotted), key=dotted)
    return data


def scenario_hash(data: dict) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON of ``data``."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def bundled_path(name: str) -> str:
    """Path of a scenario file shipped in the package data directory."""
    dir_path = os.path.dirname(os.path.realpath(__file__))
    return os.path.join(dir_path, "data", name)


def find_scenario(path: str) -> str:
    """``path`` itself if it exists, else the bundled scenario of that name."""
    if os.path.exists(path):
        return path
    for candidate in (path, path + ".toml", path + ".json"):
        bundled = bundled_path(candidate)
        if os.path.exists(bundled):
            return bundled
    raise ConfigError("scenario file not found", path)


def parse_text(text: str, path: str) -> dict:
    try:
        if path.endswith(".json"):
            return json.loads(text)
        return tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, path, exc.lineno)
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), path, int(match.group(1)) if match else None)


def from_dict(data: dict, overrides=(), path=None, text=None) -> ScenarioFile:
    """
    Check and finalize an in-memory scenario.

    :param overrides: ``key=value`` strings or ``(keys, value)`` pairs
    """
    data = copy.deepcopy(data)
    check_keys(data, path=path, text=text)
    if "scenario" not in data:
        raise ConfigError("missing [scenario] table", path, key="scenario")
    tree = schema()
    for override in overrides:
        keys, value = parse_override(override) if isinstance(override, str) else override
        apply_override(data, keys, value, tree)
        logger.info("override %s = %r", ".".join(keys), value)
    check_keys(data, tree, path=path, text=text)
    return ScenarioFile(data, path, scenario_hash(data))


def load_scenario(path: str, overrides=()) -> ScenarioFile:
    """
    Load a JSON or TOML scenario file and apply overrides.

    :param path: file path or name of a bundled scenario
    :param overrides: ``key=value`` strings, dotted keys into the scenario tree
    :return: effective configuration with its hash
    :raises ConfigError: parse error (with line), unknown key (with dotted
        path and line where it can be located) or malformed override
    """
    path = find_scenario(path)
    with open(path) as f:
        text = f.read()
    return from_dict(parse_text(text, path), overrides, path, text)


def resolve(scenario: ScenarioFile, relative: str) -> str:
    """Resolve a path given in a scenario file against the file's directory."""
    if scenario.path is None or os.path.isabs(relative):
        return relative
    return os.path.join(os.path.dirname(os.path.abspath(scenario.path)), relative)


def section(scenario: ScenarioFile, name: str) -> dict:
    return dict(scenario.data.get(name, {}))
