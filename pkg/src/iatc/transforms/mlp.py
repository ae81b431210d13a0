"""Fully-connected MLP mapping control: softplus hidden units, linear output.

Trained by plain mini-batch gradient descent on mean squared error with
hand-written backpropagation; fully deterministic given the seed. Inputs
and outputs are standardized internally (statistics stored on the map).
"""
from __future__ import annotations

import numpy as np

from ..exceptions import FitError
from ..softplus import softplus, softplus_derivative
from .base import FittedMap, MappingMethod, as_values, register


def init_network(layer_sizes, rng):
    """He-style Gaussian init, biases at zero."""
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(weights, biases, X):
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = softplus(h @ W + b)
    return h @ weights[-1] + biases[-1]


def loss_and_gradients(weights, biases, X, Y):
    """MSE plus its gradients, via backprop. Returns (loss, dWs, dbs)."""
    pre_acts = []
    activations = [X]
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        z = h @ W + b
        pre_acts.append(z)
        h = softplus(z)
        activations.append(h)
    out = h @ weights[-1] + biases[-1]
    diff = out - Y
    with np.errstate(over="ignore"):  # divergence shows up as a non-finite loss
        loss = float(np.mean(diff**2))

    n_terms = diff.size
    delta = 2.0 * diff / n_terms
    dWs = [None] * len(weights)
    dbs = [None] * len(biases)
    dWs[-1] = activations[-1].T @ delta
    dbs[-1] = delta.sum(axis=0)
    upstream = delta @ weights[-1].T
    for layer in range(len(weights) - 2, -1, -1):
        dz = upstream * softplus_derivative(pre_acts[layer])
        dWs[layer] = activations[layer].T @ dz
        dbs[layer] = dz.sum(axis=0)
        upstream = dz @ weights[layer].T
    return loss, dWs, dbs


@register
class MlpMethod(MappingMethod):
    kind = "mlp"
    seeded = True

    def __init__(self, hidden_layout=(32, 32, 32), epochs=200, batch=32, lr=0.01, seed=0):
        if not hidden_layout:
            raise FitError("hidden_layout must be nonempty")
        self.hidden_layout = tuple(int(h) for h in hidden_layout)
        self.epochs = int(epochs)
        self.batch = int(batch)
        self.lr = float(lr)
        self.seed = int(seed)

    def fit(self, source, target) -> FittedMap:
        X = as_values(source)
        Y = as_values(target)
        n = X.shape[0]
        if Y.shape[0] != n:
            raise FitError("source and target must share stimuli")
        if n < self.batch:
            raise FitError(f"need at least batch={self.batch} training stimuli, got {n}")

        x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
        x_std = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
        y_std = np.where(Y.std(axis=0) > 0, Y.std(axis=0), 1.0)
        Xs = (X - x_mean) / x_std
        Ys = (Y - y_mean) / y_std

        rng = np.random.default_rng(self.seed)
        sizes = (X.shape[1],) + self.hidden_layout + (Y.shape[1],)
        weights, biases = init_network(sizes, rng)

        loss = float(np.mean((forward(weights, biases, Xs) - Ys) ** 2))
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch):
                idx = order[start:start + self.batch]
                loss, dWs, dbs = loss_and_gradients(weights, biases, Xs[idx], Ys[idx])
                if not np.isfinite(loss):
                    raise FitError(f"training diverged (loss not finite) at epoch {epoch}")
                for li in range(len(weights)):
                    weights[li] -= self.lr * dWs[li]
                    biases[li] -= self.lr * dbs[li]

        return FittedMap(
            kind=self.kind,
            params={
                **{f"W{li}": W for li, W in enumerate(weights)},
                **{f"b{li}": b for li, b in enumerate(biases)},
                "n_layers": len(weights),
                "x_mean": x_mean,
                "x_std": x_std,
                "y_mean": y_mean,
                "y_std": y_std,
            },
            hyperparameters={
                "hidden_layout": list(self.hidden_layout),
                "epochs": self.epochs,
                "batch": self.batch,
                "lr": self.lr,
                "seed": self.seed,
            },
            diagnostics={"final_loss": loss, "iterations": self.epochs, "converged": True},
        )

    @staticmethod
    def predict(fitted: FittedMap, source) -> np.ndarray:
        p = fitted.params
        X = as_values(source)
        n_layers = int(p["n_layers"])
        weights = [p[f"W{li}"] for li in range(n_layers)]
        biases = [p[f"b{li}"] for li in range(n_layers)]
        if X.shape[1] != weights[0].shape[0]:
            raise FitError(f"source has {X.shape[1]} neurons, map expects {weights[0].shape[0]}")
        Xs = (X - p["x_mean"]) / p["x_std"]
        out = forward(weights, biases, Xs)
        return out * p["y_std"] + p["y_mean"]


def fit_mlp(source, target, hidden_layout=(32, 32, 32), epochs=200, batch=32,
            lr=0.01, seed=0) -> FittedMap:
    return MlpMethod(hidden_layout=hidden_layout, epochs=epochs, batch=batch,
                     lr=lr, seed=seed).fit(source, target)
