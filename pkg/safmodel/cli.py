# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Command line front end. Every subcommand reads one scenario file and writes
its artifacts to the output directory.
"""

import argparse
import glob
import json
import logging
import os
import sys

from . import __version__
from .algebra import ModelConstructionError
from .config import ConfigError, load_scenario, section
from .core_model import SpecError
from .oracles import OracleError, generate_dataset, reverse_lookup
from .solver import INFEASIBLE, export_model, verify_solution
from .surrogate import NetworkFormatError, load_network, save_network
from .trainer import TrainConfig, TrainingError, train_relu_net, write_metrics

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def safmodel_parser():
    parser = argparse.ArgumentParser(prog="safmodel",
                                     description="Superstructure optimization with embedded ReLU surrogates.")
    parser.add_argument('--version', help='Display version', action='version', version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--scenario', required=True, help='Scenario file (JSON or TOML) or bundled scenario name')
    common.add_argument('--out', default='.', help='Output directory')
    common.add_argument('--seed', type=int, help='Override the scenario seed')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='Override a scenario entry by dotted key, repeatable')
    common.add_argument('-v', '--verbose', action='count', default=0, help='More logging, repeatable')

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument('--gap', type=float, help='Relative optimality gap')
    solving.add_argument('--time-limit', type=float, help='Time limit per solve in seconds')
    solving.add_argument('--workers', type=int, default=1, help='Concurrent solves in sweeps')

    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True
    sub.add_parser('gen-data', parents=[common], help='Sample the process oracles into dataset CSVs')
    sub.add_parser('train', parents=[common], help='Train the surrogate networks on the datasets')
    sub.add_parser('solve', parents=[common, solving], help='Solve the scenario to global optimality')
    p = sub.add_parser('pareto', parents=[common, solving], help='ε-constraint sweep over emission caps')
    p.add_argument('--caps', type=int, help='Number of caps between maximum and minimum emissions')
    p = sub.add_parser('verify', parents=[common], help='Check a solution file against the model')
    p.add_argument('--solution', help='Solution JSON (default <out>/solution.json)')
    p = sub.add_parser('export', parents=[common], help='Write the model as lp-text or MPS')
    p.add_argument('--format', choices=['lp', 'mps'], default='lp', help='Model file format')
    p = sub.add_parser('report', parents=[common, solving], help='Kerosene metrics and cost breakdown')
    p.add_argument('--solution', help='Solution JSON to evaluate instead of solving')
    sub.add_parser('plot-data', parents=[common, solving], help='x/y series of the Pareto front')
    sub.add_parser('sweep', parents=[common, solving], help='Price sensitivity sweep')
    return parser


def _setup_logging(verbose):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)
    for handler in logging.getLogger().handlers:
        handler.setLevel(level)


def _overrides(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append("scenario.seed={}".format(args.seed))
    return overrides


def _oracle_names(scenario):
    names = list(section(scenario, "data"))
    if not names:
        raise ConfigError("scenario has no [data] table", scenario.path, key="data")
    return names


def gen_data(args, scenario):
    seed = section(scenario, "scenario").get("seed", 0)
    for name in _oracle_names(scenario):
        if reverse_lookup(name) is None:
            raise ConfigError("unknown oracle {}".format(name), scenario.path, key="data." + name)
        opts = section(scenario, "data")[name]
        path = os.path.join(args.out, "data_{}.csv".format(name))
        dataset = generate_dataset(name, int(opts.get("n", 1000)), int(opts.get("seed", seed)), path,
                                   include_extremes=bool(opts.get("include_extremes", True)),
                                   workers=int(opts.get("workers", 1)))
        print("{}: {} rows -> {}".format(name, len(dataset.X), path))
    return EXIT_OK


def train(args, scenario):
    seed = section(scenario, "scenario").get("seed", 0)
    table = section(scenario, "train")
    for name in _oracle_names(scenario):
        fields = dict((k, v) for k, v in table.items() if k in TrainConfig._fields)
        fields.setdefault("seed", seed)
        fields.update(table.get(name, {}))
        if "betas" in fields:
            fields["betas"] = tuple(fields["betas"])
        result = train_relu_net(os.path.join(args.out, "data_{}.csv".format(name)), TrainConfig(**fields))
        save_network(result.net, os.path.join(args.out, "net_{}.json".format(name)))
        write_metrics(result.metrics, os.path.join(args.out, "metrics_{}.json".format(name)),
                      scenario=section(scenario, "scenario").get("name"), digest=scenario.digest,
                      seed=fields["seed"], oracle=name, epochs=len(result.history))
        print("{}: test r2 {:.6f}, mse {:.3g}".format(name, result.metrics.r2, result.metrics.mse))
    return EXIT_OK


def _config(args, scenario):
    """Scenario configuration with trained networks from the output directory and solver flags."""
    from .scenario import from_scenario

    trained = {}
    for path in sorted(glob.glob(os.path.join(args.out, "net_*.json"))):
        trained[os.path.basename(path)[len("net_"):-len(".json")]] = load_network(path)
    cfg = from_scenario(scenario, trained)
    solver = cfg.solver
    if getattr(args, "gap", None) is not None:
        solver = solver._replace(rel_gap=args.gap)
    if getattr(args, "time_limit", None) is not None:
        solver = solver._replace(time_limit=args.time_limit)
    return cfg._replace(solver=solver)


def solve(args, scenario):
    from .scenario import solution_to_dict, solve as solve_scenario, write_json

    cfg = _config(args, scenario)
    handler = logging.FileHandler(os.path.join(args.out, "solver.log"), mode="w")
    handler.setFormatter(logging.Formatter("%(message)s"))
    solver_logger = logging.getLogger("safmodel.solver")
    solver_logger.addHandler(handler)
    solver_logger.setLevel(logging.INFO)
    try:
        model, sol = solve_scenario(cfg)
    finally:
        solver_logger.removeHandler(handler)
        handler.close()
    write_json(solution_to_dict(cfg, model, sol), os.path.join(args.out, "solution.json"), cfg)
    if sol.report is not None:
        write_json({"verifier": sol.report}, os.path.join(args.out, "verifier.json"), cfg)
    print("status {} objective {} gap {}".format(sol.status, sol.objective, sol.gap))
    return EXIT_INFEASIBLE if sol.status == INFEASIBLE else EXIT_OK


def pareto(args, scenario):
    from .scenario import default_caps, pareto_sweep, write_json, write_points_csv

    cfg = _config(args, scenario)
    caps = default_caps(cfg, args.caps) if args.caps else None
    points = pareto_sweep(cfg, caps, workers=args.workers)
    write_points_csv(points, os.path.join(args.out, "pareto.csv"), cfg)
    write_json({"points": points}, os.path.join(args.out, "pareto.json"), cfg)
    for p in points:
        print("cap {} status {} objective {}".format(p.cap, p.status, p.objective))
    return EXIT_INFEASIBLE if all(p.status == INFEASIBLE for p in points) else EXIT_OK


def _read_values(path, model):
    with open(path) as f:
        data = json.load(f)
    if "values" not in data:
        raise ConfigError("solution file has no values (status {})".format(data.get("status")), path)
    by_label = data["values"]
    from .algebra import format_label
    try:
        return [by_label[format_label(v.label)] for v in model.vars]
    except KeyError as exc:
        raise ConfigError("solution file lacks variable {}".format(exc), path)


def verify(args, scenario):
    from .scenario import build_model, write_json

    cfg = _config(args, scenario)
    model = build_model(cfg)
    path = args.solution or os.path.join(args.out, "solution.json")
    report = verify_solution(model, _read_values(path, model))
    write_json({"verifier": report}, os.path.join(args.out, "verifier.json"), cfg)
    print("verifier {}".format("pass" if report.passed else "FAIL at {}".format(report.worst)))
    return EXIT_OK if report.passed else EXIT_ERROR


def export(args, scenario):
    from .scenario import build_model

    cfg = _config(args, scenario)
    path = os.path.join(args.out, "model.{}".format(args.format))
    export_model(build_model(cfg), path, args.format)
    print(path)
    return EXIT_OK


def report(args, scenario):
    from .scenario import (ParetoPoint, build_model, cost_breakdown, point_abatement, post_kerosene_metrics,
                           solve as solve_scenario, source_flows, write_json)

    cfg = _config(args, scenario)
    if args.solution:
        model = build_model(cfg)
        values = _read_values(args.solution, model)
        objective = model.value(values, ("K_tot",))
    else:
        model, sol = solve_scenario(cfg)
        if sol.status == INFEASIBLE or sol.values is None:
            print("status {}".format(sol.status))
            return EXIT_INFEASIBLE
        values, objective = sol.values, sol.objective
    data = {"objective": objective,
            "cost_breakdown": cost_breakdown(values, model, cfg.spec),
            "source_flows": source_flows(values, model, cfg.spec)}
    if cfg.spec.globals["dominance"] is not None:
        kerosene = post_kerosene_metrics(values, model, cfg.spec, objective)
        data["kerosene"] = kerosene
        if cfg.reference:
            point = ParetoPoint(None, objective, None, kerosene.specific_cost, kerosene.specific_emissions,
                                [], {}, None, None, kerosene)
            data["abatement_cost"] = point_abatement(point, cfg.reference)
    write_json(data, os.path.join(args.out, "report.json"), cfg)
    return EXIT_OK


def plot_data(args, scenario):
    from .scenario import pareto_sweep, plot_data as series, write_json

    cfg = _config(args, scenario)
    write_json(series(pareto_sweep(cfg, workers=args.workers)), os.path.join(args.out, "plot.json"), cfg)
    return EXIT_OK


def sweep(args, scenario):
    from .scenario import compare_fixed_adaptable, heat_integration_sensitivity, price_sweep, write_json

    cfg = _config(args, scenario)
    if not cfg.sweep or "parameter" not in cfg.sweep or "values" not in cfg.sweep:
        raise ConfigError("scenario has no [sweep] parameter and values", scenario.path, key="sweep")
    parameter, values = cfg.sweep["parameter"], cfg.sweep["values"]
    if parameter == "heat_integration":
        result = heat_integration_sensitivity(cfg, values, args.workers)
    elif cfg.sweep.get("fixed_reference") is not None:
        result = compare_fixed_adaptable(cfg, values, cfg.sweep["fixed_reference"], parameter, args.workers)
    else:
        result = [{"value": v, "point": p} for v, p in price_sweep(cfg, parameter, values, args.workers)]
    write_json({"parameter": parameter, "results": result}, os.path.join(args.out, "sweep.json"), cfg)
    return EXIT_OK


COMMANDS = {"gen-data": gen_data, "train": train, "solve": solve, "pareto": pareto, "verify": verify,
            "export": export, "report": report, "plot-data": plot_data, "sweep": sweep}


def main(argv=None):
    parser = safmodel_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        scenario = load_scenario(args.scenario, _overrides(args))
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, scenario)
    except (ConfigError, SpecError, ModelConstructionError, NetworkFormatError, OracleError,
            TrainingError, OSError, ValueError) as exc:
        print("error: {}".format(exc), file=sys.stderr)
        return EXIT_ERROR


def run():
    sys.exit(main())
