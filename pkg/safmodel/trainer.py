# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Training of single-hidden-layer ReLU regression networks on oracle datasets
and the regression metrics reported for them.
"""

import copy
import json
import logging
import math
from collections import namedtuple, OrderedDict

import numpy as np
import torch
from torch import nn

from .oracles import Dataset, read_dataset
from .surrogate import DEFAULT_HIDDEN_WIDTHS, IDENTITY, RELU, Layer, ReluNetwork, forward

logger = logging.getLogger(__name__)

MAPE_FLOOR = 1e-9


class TrainingError(Exception):
    """Dataset unusable for training or not matching the network schema."""


class TrainingDivergedError(TrainingError):
    """The training loss became non-finite."""
    def __init__(self, epoch, batch, lr, loss):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        self.loss = loss

    def __str__(self):
        return "training diverged at epoch {} batch {} (lr {:g}): loss {}".format(
            self.epoch, self.batch, self.lr, self.loss)


TrainConfig = namedtuple("TrainConfig", ["hidden_width", "epochs", "batch_size", "lr", "betas", "seed",
                                         "test_fraction", "validation_fraction", "patience", "min_delta"])
TrainConfig.__new__.__defaults__ = (None, 500, 128, 1e-3, (0.9, 0.999), 0, 0.2, 0.2, 30, 0.0)
TrainConfig.__doc__ = """
Training hyperparameters. ``hidden_width`` None picks the default width of
the oracle the dataset comes from. The test split is taken first, the
validation split is a fraction of the remaining training rows.
"""

Standardizer = namedtuple("Standardizer", ["mean", "std"])

MetricsReport = namedtuple("MetricsReport", ["mse_train", "mse", "r2", "mae", "mape", "mape_excluded",
                                             "per_output"])
MetricsReport.__doc__ = """
Regression metrics in raw output units. ``r2`` is ``1 - SS_res/SS_tot``
pooled over all outputs, ``mape`` is in percent over targets with
``|y| >= 1e-9``; ``mape_excluded`` counts the targets left out. ``per_output``
maps output name to a dict of mse, r2, mae and mape.
"""

TrainResult = namedtuple("TrainResult", ["net", "metrics", "history"])


def check_config(cfg: TrainConfig):
    for name in ("test_fraction", "validation_fraction"):
        if not 0.0 < getattr(cfg, name) < 1.0:
            raise TrainingError("{} must be in (0, 1)".format(name))
    if cfg.hidden_width is not None and cfg.hidden_width < 1:
        raise TrainingError("hidden width must be at least 1")
    if cfg.epochs < 1 or cfg.batch_size < 1:
        raise TrainingError("epochs and batch size must be positive")


def fit_standardizer(data) -> Standardizer:
    """
    Per-column mean and population standard deviation. Constant columns get
    std 1.

    :raises TrainingError: fewer than two rows
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise TrainingError("need at least 2 rows to standardize, got {}".format(
            0 if data.ndim != 2 else data.shape[0]))
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if np.any(constant):
        logger.warning("constant columns %s standardized with std 1", np.flatnonzero(constant).tolist())
        std = np.where(constant, 1.0, std)
    return Standardizer(mean, std)


def split_indices(n: int, cfg: TrainConfig):
    """Deterministic (train, validation, test) row indices."""
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_test = int(round(cfg.test_fraction * n))
    rest = perm[n_test:]
    n_val = int(round(cfg.validation_fraction * len(rest)))
    return np.sort(rest[n_val:]), np.sort(rest[:n_val]), np.sort(perm[:n_test])


def _as_dataset(dataset):
    if isinstance(dataset, Dataset):
        return dataset
    return read_dataset(dataset)


def train_relu_net(dataset, cfg: TrainConfig = None) -> TrainResult:
    """
    Train a one-hidden-layer ReLU network with Adam on the mean squared error
    of standardized outputs, early stopping on the validation loss.

    :param dataset: :class:`~safmodel.oracles.Dataset` or dataset CSV path
    :param cfg: hyperparameters
    :return: network (input box from the data bounds), metrics on the test
        split and the per-epoch (train, validation) loss history
    :raises TrainingError: dataset too small or degenerate
    :raises TrainingDivergedError: non-finite loss
    """
    cfg = cfg or TrainConfig()
    check_config(cfg)
    dataset = _as_dataset(dataset)
    X = np.asarray(dataset.X, dtype=float)
    Y = np.asarray(dataset.Y, dtype=float)
    if X.shape[0] != Y.shape[0] or X.shape[0] < 4:
        raise TrainingError("dataset has {} rows, at least 4 needed".format(X.shape[0]))
    width = cfg.hidden_width or DEFAULT_HIDDEN_WIDTHS.get(dataset.oracle, 16)

    train, val, test = split_indices(X.shape[0], cfg)
    if len(train) < 2 or len(val) < 1 or len(test) < 1:
        raise TrainingError("split leaves too few rows ({}/{}/{})".format(len(train), len(val), len(test)))
    xs = fit_standardizer(X[train])
    ys = fit_standardizer(Y[train])

    def scaled(rows):
        return (torch.from_numpy((X[rows] - xs.mean) / xs.std),
                torch.from_numpy((Y[rows] - ys.mean) / ys.std))

    xt, yt = scaled(train)
    xv, yv = scaled(val)

    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        torch.manual_seed(cfg.seed)
        model = nn.Sequential(nn.Linear(X.shape[1], width), nn.ReLU(), nn.Linear(width, Y.shape[1])).double()
        optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=tuple(cfg.betas))
        loss_fn = nn.MSELoss()
        generator = torch.Generator().manual_seed(cfg.seed)

        best, best_state, stale = math.inf, copy.deepcopy(model.state_dict()), 0
        history = []
        for epoch in range(cfg.epochs):
            model.train()
            perm = torch.randperm(len(train), generator=generator)
            for batch, start in enumerate(range(0, len(train), cfg.batch_size)):
                idx = perm[start:start + cfg.batch_size]
                optimizer.zero_grad()
                loss = loss_fn(model(xt[idx]), yt[idx])
                if not torch.isfinite(loss):
                    raise TrainingDivergedError(epoch, batch, cfg.lr, float(loss))
                loss.backward()
                optimizer.step()
            model.eval()
            with torch.no_grad():
                train_loss = float(loss_fn(model(xt), yt))
                val_loss = float(loss_fn(model(xv), yv))
            if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                raise TrainingDivergedError(epoch, None, cfg.lr, train_loss)
            history.append((train_loss, val_loss))
            if val_loss < best - cfg.min_delta:
                best, best_state, stale = val_loss, copy.deepcopy(model.state_dict()), 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.info("early stop at epoch %d, best validation loss %.6g", epoch, best)
                    break
            logger.debug("epoch=%d train=%.6g val=%.6g", epoch, train_loss, val_loss)
        model.load_state_dict(best_state)
    finally:
        torch.set_num_threads(threads)

    state = model.state_dict()
    layers = [Layer(state["0.weight"].detach().numpy().copy(), state["0.bias"].detach().numpy().copy(), RELU),
              Layer(state["2.weight"].detach().numpy().copy(), state["2.bias"].detach().numpy().copy(), IDENTITY)]
    net = ReluNetwork(layers, xs, ys, (X.min(axis=0), X.max(axis=0)),
                      input_names=dataset.input_names, output_names=dataset.output_names,
                      name=dataset.oracle or "net",
                      metadata={"seed": cfg.seed, "epochs": len(history), "hidden_width": width,
                                "dataset_seed": dataset.seed, "rows": int(X.shape[0])})
    metrics = evaluate_metrics(net, dataset, rows=test)
    train_metrics = evaluate_metrics(net, dataset, rows=train)
    metrics = metrics._replace(mse_train=train_metrics.mse)
    logger.info("trained %r: test r2=%.6f mse=%.3g", net, metrics.r2, metrics.mse)
    return TrainResult(net, metrics, history)


def _metrics(y, pred):
    res = pred - y
    mse = float(np.mean(res ** 2))
    mae = float(np.mean(np.abs(res)))
    ss_res = float(np.sum(res ** 2))
    ss_tot = float(np.sum((y - y.mean(axis=0)) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else 0.0
    mask = np.abs(y) >= MAPE_FLOOR
    mape = float(100.0 * np.mean(np.abs(res[mask] / y[mask]))) if np.any(mask) else 0.0
    return mse, r2, mae, mape, int(np.size(y) - np.count_nonzero(mask))


def evaluate_metrics(net: ReluNetwork, dataset, rows=None) -> MetricsReport:
    """
    MSE, R², MAE and MAPE of a network on a dataset.

    :param net: network
    :param dataset: :class:`~safmodel.oracles.Dataset` or dataset CSV path
    :param rows: restrict to these row indices
    :raises TrainingError: input or output names do not match the network
    """
    dataset = _as_dataset(dataset)
    for what, mine, theirs in (("input", net.input_names, dataset.input_names),
                               ("output", net.output_names, dataset.output_names)):
        if mine and theirs and list(mine) != list(theirs):
            raise TrainingError("{} columns of the dataset do not match network {}".format(what, net.name))
    X = np.asarray(dataset.X, dtype=float)
    Y = np.asarray(dataset.Y, dtype=float)
    if rows is not None:
        X, Y = X[rows], Y[rows]
    if X.shape[1] != net.n_inputs or Y.shape[1] != net.n_outputs:
        raise TrainingError("dataset is {}x{}, network {}x{}".format(
            X.shape[1], Y.shape[1], net.n_inputs, net.n_outputs))
    pred = forward(net, X)
    mse, r2, mae, mape, excluded = _metrics(Y, pred)
    names = net.output_names or ["y{}".format(k) for k in range(net.n_outputs)]
    per_output = OrderedDict()
    for k, name in enumerate(names):
        o = _metrics(Y[:, k:k + 1], pred[:, k:k + 1])
        per_output[name] = {"mse": o[0], "r2": o[1], "mae": o[2], "mape": o[3]}
    return MetricsReport(None, mse, r2, mae, mape, excluded, per_output)


def metrics_to_dict(report: MetricsReport) -> dict:
    return OrderedDict(report._asdict())


def write_metrics(report: MetricsReport, path, **extra):
    data = OrderedDict(extra)
    data["metrics"] = metrics_to_dict(report)
    with open(path, "w") as f:
        json.dump(data, f, indent=1)
