from safmodel.trainer import *
from safmodel.oracles import HYDROCARBONS, Dataset, generate_dataset
from safmodel.surrogate import IDENTITY, RELU, Layer, ReluNetwork, load_network, save_network

import json

import numpy as np
import pytest

LINEAR_CFG = TrainConfig(hidden_width=8, epochs=200, batch_size=32, lr=1e-2, seed=1, patience=50)


def linear_dataset(n=400, seed=0):
    x = np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, 1))
    return Dataset("linear", ("x",), ("y",), x, 2.0 * x, seed)


def scalar_net(w_out, output_mean=0.0):
    layers = [Layer([[1.0]], [0.0], RELU), Layer([[w_out]], [0.0], IDENTITY)]
    return ReluNetwork(layers, ([0.0], [1.0]), ([output_mean], [1.0]), ([0.0], [10.0]))


def positive_dataset():
    x = np.arange(1.0, 11.0).reshape(-1, 1)
    return Dataset("linear", ("x",), ("y",), x, x.copy(), 0)


def test_standardizer_hand():
    s = fit_standardizer([[0.0], [2.0]])
    assert list(s.mean) == [1.0]
    assert list(s.std) == [1.0]


def test_standardizer_unit():
    data = np.random.default_rng(4).normal(3.0, 5.0, size=(100, 3))
    s = fit_standardizer(data)
    z = (data - s.mean) / s.std
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(z.std(axis=0), 1.0, atol=1e-12)


def test_standardizer_constant(caplog):
    s = fit_standardizer([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    assert s.std[0] == 1.0
    assert "constant columns" in caplog.text


def test_standardizer_too_few_rows():
    with pytest.raises(TrainingError):
        fit_standardizer([[1.0, 2.0]])


def test_metrics_perfect():
    m = evaluate_metrics(scalar_net(1.0), positive_dataset())
    assert m.r2 == 1.0
    assert m.mae == 0.0
    assert m.mse == 0.0


def test_metrics_mean_predictor():
    data = positive_dataset()
    net = scalar_net(0.0, output_mean=float(data.Y.mean()))
    assert evaluate_metrics(net, data).r2 == pytest.approx(0.0, abs=1e-12)


def test_metrics_mape():
    m = evaluate_metrics(scalar_net(1.1), positive_dataset())
    assert m.mape == pytest.approx(10.0, abs=1e-9)
    assert m.mape_excluded == 0


def test_metrics_mape_excludes_zero():
    x = np.array([[1.0], [2.0], [3.0]])
    data = Dataset("linear", ("x",), ("y",), x, np.array([[0.0], [2.0], [3.0]]), 0)
    m = evaluate_metrics(scalar_net(1.0), data)
    assert m.mape_excluded == 1
    assert m.mape == 0.0


def test_metrics_name_mismatch():
    net = scalar_net(1.0)
    net.input_names = ["T"]
    with pytest.raises(TrainingError):
        evaluate_metrics(net, positive_dataset())


def test_split_deterministic():
    cfg = TrainConfig(seed=3)
    train, val, test = split_indices(100, cfg)
    assert len(test) == 20 and len(val) == 16 and len(train) == 64
    assert sorted(np.concatenate([train, val, test]).tolist()) == list(range(100))
    again = split_indices(100, cfg)
    assert all(np.array_equal(a, b) for a, b in zip((train, val, test), again))


def test_config_rejected():
    with pytest.raises(TrainingError):
        check_config(TrainConfig(test_fraction=0.0))
    with pytest.raises(TrainingError):
        check_config(TrainConfig(epochs=0))


def test_train_linear():
    """A line is learned almost exactly"""
    result = train_relu_net(linear_dataset(), LINEAR_CFG)
    assert result.metrics.r2 >= 0.999
    assert result.net.hidden_widths == [8]
    assert len(result.history) <= 200


def test_train_deterministic():
    cfg = LINEAR_CFG._replace(epochs=20)
    a = train_relu_net(linear_dataset(), cfg)
    b = train_relu_net(linear_dataset(), cfg)
    assert a.net == b.net
    assert a.history == b.history


def test_train_round_trip(tmp_path):
    data = linear_dataset()
    result = train_relu_net(data, LINEAR_CFG._replace(epochs=20))
    path = str(tmp_path / "linear.json")
    save_network(result.net, path)
    net = load_network(path)
    assert evaluate_metrics(net, data) == evaluate_metrics(result.net, data)


def test_train_too_small():
    with pytest.raises(TrainingError):
        train_relu_net(linear_dataset(n=3), LINEAR_CFG)


def test_write_metrics(tmp_path):
    path = str(tmp_path / "metrics.json")
    write_metrics(evaluate_metrics(scalar_net(1.0), positive_dataset()), path, network="linear")
    with open(path) as f:
        data = json.load(f)
    assert data["network"] == "linear"
    assert data["metrics"]["r2"] == 1.0


@pytest.mark.slow
def test_train_ft():
    data = generate_dataset("ft", 3000, seed=0)
    result = train_relu_net(data, TrainConfig(seed=0))
    kero = ["w_out1_{}".format(c) for c in HYDROCARBONS[7:16]]
    assert len(kero) == 9
    for name in kero:
        assert result.metrics.per_output[name]["r2"] >= 0.995, name
