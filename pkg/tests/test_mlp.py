import numpy as np
import pytest

from iatc.exceptions import FitError
from iatc.scores import r2_per_neuron
from iatc.transforms import MlpMethod, fit_mlp, fit_ridge, RidgeMethod
from iatc.transforms.mlp import forward, init_network, loss_and_gradients


def finite_difference_grads(weights, biases, X, Y, h=1e-6):
    """Central-difference oracle for the network gradients."""
    dWs = [np.zeros_like(W) for W in weights]
    dbs = [np.zeros_like(b) for b in biases]

    def loss():
        return float(np.mean((forward(weights, biases, X) - Y) ** 2))

    for li, W in enumerate(weights):
        it = np.nditer(W, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = W[idx]
            W[idx] = orig + h
            up = loss()
            W[idx] = orig - h
            down = loss()
            W[idx] = orig
            dWs[li][idx] = (up - down) / (2 * h)
    for li, b in enumerate(biases):
        for idx in range(b.size):
            orig = b[idx]
            b[idx] = orig + h
            up = loss()
            b[idx] = orig - h
            down = loss()
            b[idx] = orig
            dbs[li][idx] = (up - down) / (2 * h)
    return dWs, dbs


def test_gradient_check_against_central_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 4))
    Y = rng.normal(size=(12, 3))
    worst = 0.0
    for point in range(5):
        weights, biases = init_network((4, 6, 5, 3), np.random.default_rng(100 + point))
        _, dWs, dbs = loss_and_gradients(weights, biases, X, Y)
        fd_W, fd_b = finite_difference_grads(weights, biases, X, Y)
        for got, want in zip(dWs + dbs, fd_W + fd_b):
            scale = np.maximum(np.abs(got) + np.abs(want), 1e-8)
            worst = max(worst, float(np.max(np.abs(got - want) / scale)))
    assert worst < 1e-5


def test_linear_relation_matches_ridge():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(260, 5))
    W = rng.normal(size=(5, 3))
    Y = X @ W + 0.05 * rng.normal(size=(260, 3))
    train, test = np.arange(200), np.arange(200, 260)

    ridge_fit = fit_ridge(X[train], Y[train], seed=0)
    ridge_r2 = np.nanmedian(r2_per_neuron(Y[test], RidgeMethod.predict(ridge_fit, X[test])))

    mlp_fit = fit_mlp(X[train], Y[train], hidden_layout=(16, 16), epochs=400,
                      batch=32, lr=0.05, seed=0)
    mlp_r2 = np.nanmedian(r2_per_neuron(Y[test], MlpMethod.predict(mlp_fit, X[test])))
    assert abs(mlp_r2 - ridge_r2) < 0.05


def test_zero_epochs_is_deterministic_initialization():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 3))
    Y = rng.normal(size=(40, 2))
    a = fit_mlp(X, Y, hidden_layout=(8,), epochs=0, batch=8, seed=5)
    b = fit_mlp(X, Y, hidden_layout=(8,), epochs=0, batch=8, seed=5)
    pa = MlpMethod.predict(a, X)
    pb = MlpMethod.predict(b, X)
    assert np.array_equal(pa, pb)
    c = fit_mlp(X, Y, hidden_layout=(8,), epochs=0, batch=8, seed=6)
    assert not np.array_equal(pa, MlpMethod.predict(c, X))


def test_same_seed_training_is_bitwise_deterministic():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 4))
    Y = rng.normal(size=(50, 2))
    a = fit_mlp(X, Y, epochs=5, batch=16, seed=7)
    b = fit_mlp(X, Y, epochs=5, batch=16, seed=7)
    for key in a.params:
        if isinstance(a.params[key], np.ndarray):
            assert np.array_equal(a.params[key], b.params[key])


def test_divergence_reports_epoch():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(64, 3)) * 10
    Y = rng.normal(size=(64, 2)) * 10
    with pytest.raises(FitError, match="epoch"):
        fit_mlp(X, Y, hidden_layout=(32, 32), epochs=50, batch=8, lr=1e4, seed=0)


def test_batch_larger_than_data_rejected():
    rng = np.random.default_rng(5)
    with pytest.raises(FitError, match="batch"):
        fit_mlp(rng.normal(size=(10, 2)), rng.normal(size=(10, 2)), batch=32)


def test_empty_hidden_layout_rejected():
    with pytest.raises(FitError, match="hidden_layout"):
        MlpMethod(hidden_layout=())
