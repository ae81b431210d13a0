import numpy as np
import pytest

from iatc.exceptions import FitError
from iatc.scores import r2_per_neuron
from iatc.transforms import RidgeMethod, fit_ridge, ridge_path
from iatc.transforms.ridge import cv_folds


def brute_force_cv_selection(X, Y, lambdas, folds, seed):
    """Oracle: per-lambda holdout evaluation via explicit normal equations.

    Shares only the fold assignment with the implementation; each ridge
    solve goes through (Xc'Xc + lam I) theta = Xc'Yc directly.
    """
    n = X.shape[0]
    fold_idx = cv_folds(n, folds, seed)
    all_idx = np.arange(n)
    scores = np.zeros((folds, len(lambdas)))
    for k, val in enumerate(fold_idx):
        train = np.setdiff1d(all_idx, val)
        xm, ym = X[train].mean(0), Y[train].mean(0)
        Xc, Yc = X[train] - xm, Y[train] - ym
        for li, lam in enumerate(lambdas):
            W = np.linalg.solve(Xc.T @ Xc + lam * np.eye(X.shape[1]), Xc.T @ Yc)
            pred = (X[val] - xm) @ W + ym
            scores[k, li] = np.nanmean(r2_per_neuron(Y[val], pred))
    return lambdas[int(np.argmax(scores.mean(axis=0)))]


def test_identity_task_small_lambda():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 5))
    fitted = fit_ridge(X, X, lambda_grid=[1e-8], folds=5, seed=1)
    pred = RidgeMethod.predict(fitted, X)
    assert np.nanmin(r2_per_neuron(X, pred)) >= 0.999


def test_noiseless_linear_closure():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 6))
    W = rng.normal(size=(6, 4))
    Y = X @ W + rng.normal(size=4)
    fitted = fit_ridge(X, Y, seed=2)
    test_X = rng.normal(size=(40, 6))
    pred = RidgeMethod.predict(fitted, test_X)
    assert np.nanmedian(r2_per_neuron(test_X @ W + (Y - X @ W)[0], pred)) >= 0.999


def test_cv_selection_matches_brute_force_oracle():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 5))
    W = rng.normal(size=(5, 3))
    Y = X @ W + 0.1 * rng.normal(size=(20, 3))
    grid = tuple(np.logspace(-4, 4, 9))
    for seed in (0, 1, 2, 3):
        fitted = fit_ridge(X, Y, lambda_grid=grid, folds=5, seed=seed)
        oracle_lam = brute_force_cv_selection(X, Y, np.asarray(grid), 5, seed)
        assert fitted.diagnostics["selected_regularization"] == pytest.approx(oracle_lam)


def test_shrinkage_monotone_and_limit_is_train_mean():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 4))
    Y = X @ rng.normal(size=(4, 2)) + rng.normal(size=(50, 2))
    lambdas = np.logspace(-4, 8, 13)
    path = ridge_path(X, Y, lambdas)
    norms = [np.linalg.norm(W) for W, _ in path]
    assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))
    W_inf, b_inf = path[-1]
    pred = X @ W_inf + b_inf
    assert pred == pytest.approx(np.tile(Y.mean(0), (50, 1)), abs=1e-2)


def test_rank_zero_design_rejected():
    X = np.full((20, 3), 2.0)
    Y = np.random.default_rng(4).normal(size=(20, 2))
    with pytest.raises(FitError, match="rank-0"):
        fit_ridge(X, Y)


def test_too_few_stimuli_rejected():
    rng = np.random.default_rng(5)
    with pytest.raises(FitError, match="at least 10"):
        fit_ridge(rng.normal(size=(8, 2)), rng.normal(size=(8, 2)), folds=5)


def test_deterministic_fit():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 4))
    Y = rng.normal(size=(30, 3))
    a = fit_ridge(X, Y, seed=9)
    b = fit_ridge(X, Y, seed=9)
    assert np.array_equal(a.params["weights"], b.params["weights"])
    assert np.array_equal(a.params["intercept"], b.params["intercept"])


def test_fitted_map_round_trip_json():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 4))
    Y = rng.normal(size=(30, 2))
    fitted = fit_ridge(X, Y, seed=1)
    from iatc.transforms import FittedMap, predict_map

    revived = FittedMap.from_jsonable(fitted.to_jsonable())
    assert np.array_equal(revived.params["weights"], fitted.params["weights"])
    assert np.array_equal(predict_map(revived, X), RidgeMethod.predict(fitted, X))
