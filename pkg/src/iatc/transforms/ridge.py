"""Cross-validated multi-target ridge regression.

One shared penalty for all target neurons, selected by k-fold CV on mean
per-neuron R^2. Each fold (and the final refit) is solved through a single
SVD of the centered design, so every grid point reuses one decomposition.
The intercept is implicit in the centering and never penalized.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import FitError
from ..scores import r2_per_neuron
from .base import FittedMap, MappingMethod, as_values, register

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4.0, 4.0, 9))


def cv_folds(n_samples, folds, seed):
    """Deterministic k-fold assignment: seeded permutation cut into chunks."""
    perm = np.random.default_rng(seed).permutation(n_samples)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def _svd_coefs(Xc, Yc, lambdas):
    """Ridge weights for every lambda from one SVD of the centered design."""
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    if s.size == 0 or s[0] <= s.size * np.finfo(float).eps * max(1.0, abs(float(s[0]))):
        raise FitError("rank-0 design: source has no variance on the training stimuli")
    UtY = U.T @ Yc
    out = []
    for lam in lambdas:
        shrink = s / (s * s + lam)
        out.append(Vt.T @ (shrink[:, None] * UtY))
    return out


def ridge_path(X, Y, lambdas):
    """Weights (and intercepts) along a penalty path; used by shrinkage checks."""
    X = as_values(X)
    Y = as_values(Y)
    xm, ym = X.mean(axis=0), Y.mean(axis=0)
    coefs = _svd_coefs(X - xm, Y - ym, lambdas)
    return [(W, ym - xm @ W) for W in coefs]


@register
class RidgeMethod(MappingMethod):
    kind = "ridge"
    seeded = True

    def __init__(self, lambda_grid=None, folds=5, seed=0):
        grid = DEFAULT_LAMBDA_GRID if lambda_grid is None else tuple(lambda_grid)
        if not grid or any(l <= 0 for l in grid):
            raise FitError("lambda_grid must be nonempty with positive entries")
        self.lambda_grid = tuple(float(l) for l in grid)
        self.folds = int(folds)
        self.seed = int(seed)

    def fit(self, source, target) -> FittedMap:
        X = as_values(source)
        Y = as_values(target)
        n = X.shape[0]
        if Y.shape[0] != n:
            raise FitError("source and target must share stimuli")
        if n < 2 * self.folds:
            raise FitError(f"need at least {2 * self.folds} training stimuli, got {n}")

        folds = cv_folds(n, self.folds, self.seed)
        all_idx = np.arange(n)
        cv_scores = np.zeros((self.folds, len(self.lambda_grid)))
        for k, val in enumerate(folds):
            train = np.setdiff1d(all_idx, val)
            if train.size < 2 or val.size < 1:
                raise FitError(f"degenerate fold {k}: {train.size} train / {val.size} val")
            xm = X[train].mean(axis=0)
            ym = Y[train].mean(axis=0)
            coefs = _svd_coefs(X[train] - xm, Y[train] - ym, self.lambda_grid)
            for li, W in enumerate(coefs):
                pred = (X[val] - xm) @ W + ym
                r2 = r2_per_neuron(Y[val], pred)
                if np.all(np.isnan(r2)):
                    raise FitError(f"degenerate fold {k}: no target variance in validation")
                cv_scores[k, li] = np.nanmean(r2)
        mean_scores = cv_scores.mean(axis=0)
        best = int(np.argmax(mean_scores))
        lam = self.lambda_grid[best]

        xm, ym = X.mean(axis=0), Y.mean(axis=0)
        W = _svd_coefs(X - xm, Y - ym, [lam])[0]
        return FittedMap(
            kind=self.kind,
            params={"weights": W, "intercept": ym - xm @ W},
            hyperparameters={
                "lambda_grid": list(self.lambda_grid),
                "folds": self.folds,
                "seed": self.seed,
            },
            diagnostics={
                "selected_regularization": lam,
                "cv_mean_r2": [float(v) for v in mean_scores],
                "iterations": 1,
                "converged": True,
            },
        )

    @staticmethod
    def predict(fitted: FittedMap, source) -> np.ndarray:
        X = as_values(source)
        W = fitted.params["weights"]
        if X.shape[1] != W.shape[0]:
            raise FitError(f"source has {X.shape[1]} neurons, map expects {W.shape[0]}")
        return X @ W + fitted.params["intercept"]


def fit_ridge(source, target, lambda_grid=None, folds=5, seed=0) -> FittedMap:
    return RidgeMethod(lambda_grid=lambda_grid, folds=folds, seed=seed).fit(source, target)
