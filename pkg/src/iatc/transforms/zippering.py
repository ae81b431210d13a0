"""Zippering transforms: invert the activation, map linearly, re-apply it.

Exact variant: divide trial-averaged responses by the known softplus scale
c, invert softplus to recover pre-nonlinearity values, then fit one Poisson
GLM per target neuron whose inverse link c * softplus(.) re-applies the
activation. Approximate variant (activation unknown): Yeo-Johnson-rescale
each source neuron toward normality, then fit a Poisson GLM with an
exponential inverse link. ``linear_nonlinear`` is the preset c=1 softplus
GLM on raw source values (no inversion step).
"""
from __future__ import annotations

import numpy as np

from ..exceptions import ConvergenceError, FitError
from ..glm import Exponential, ScaledSoftplus, irls_fit
from ..power import YeoJohnsonParams, yj_apply, yj_fit
from ..softplus import softplus_inverse
from .base import FittedMap, MappingMethod, as_values, register


def _fit_glm_columns(U, Y, link, ridge_penalty, max_iter, tol):
    p = U.shape[1]
    q = Y.shape[1]
    weights = np.zeros((p, q))
    intercepts = np.zeros(q)
    iters = np.zeros(q, dtype=int)
    for j in range(q):
        try:
            fit = irls_fit(U, Y[:, j], link, ridge_penalty=ridge_penalty,
                           max_iter=max_iter, tol=tol)
        except ConvergenceError as exc:
            raise FitError(f"IRLS did not converge for target neuron {j}: {exc}") from exc
        except ValueError as exc:
            raise FitError(f"target neuron {j}: {exc}") from exc
        weights[:, j] = fit.coef
        intercepts[j] = fit.intercept
        iters[j] = fit.n_iter
    return weights, intercepts, iters


def _predict_glm_columns(U, weights, intercepts, link):
    eta = U @ weights + intercepts
    return link.mu(eta)


@register
class ExactZipperingMethod(MappingMethod):
    kind = "exact_zippering"

    def __init__(self, c=100.0, ridge_penalty=1e-8, max_iter=100, tol=1e-8,
                 invert_source=True):
        if c <= 0:
            raise FitError("softplus scale c must be positive")
        self.c = float(c)
        self.ridge_penalty = float(ridge_penalty)
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.invert_source = bool(invert_source)

    def _unmix(self, X):
        if not self.invert_source:
            return X
        if np.any(X <= 0):
            s, j = np.unravel_index(int(np.argmin(X)), X.shape)
            raise FitError(
                f"nonpositive source entry at stimulus {s}, neuron {j}; "
                "cannot unscale and invert the activation"
            )
        return softplus_inverse(X / self.c)

    def fit(self, source, target) -> FittedMap:
        X = as_values(source)
        Y = as_values(target)
        if Y.shape[0] != X.shape[0]:
            raise FitError("source and target must share stimuli")
        U = self._unmix(X)
        link = ScaledSoftplus(self.c)
        weights, intercepts, iters = _fit_glm_columns(
            U, Y, link, self.ridge_penalty, self.max_iter, self.tol
        )
        return FittedMap(
            kind=self.kind,
            params={
                "weights": weights,
                "intercept": intercepts,
                "c": self.c,
                "invert_source": self.invert_source,
            },
            hyperparameters={
                "c": self.c,
                "ridge_penalty": self.ridge_penalty,
                "max_iter": self.max_iter,
                "tol": self.tol,
                "invert_source": self.invert_source,
            },
            diagnostics={
                "iterations": int(iters.max()),
                "mean_iterations": float(iters.mean()),
                "converged": True,
            },
        )

    @staticmethod
    def predict(fitted: FittedMap, source) -> np.ndarray:
        p = fitted.params
        X = as_values(source)
        W = p["weights"]
        if X.shape[1] != W.shape[0]:
            raise FitError(f"source has {X.shape[1]} neurons, map expects {W.shape[0]}")
        c = float(p["c"])
        if p.get("invert_source", True):
            if np.any(X <= 0):
                raise FitError("nonpositive source entry; cannot invert the activation")
            U = softplus_inverse(X / c)
        else:
            U = X
        return _predict_glm_columns(U, W, p["intercept"], ScaledSoftplus(c))


register(ExactZipperingMethod, kind="linear_nonlinear",
         preset={"c": 1.0, "invert_source": False})


@register
class ApproxZipperingMethod(MappingMethod):
    kind = "approx_zippering"

    def __init__(self, ridge_penalty=1e-8, max_iter=100, tol=1e-8):
        self.ridge_penalty = float(ridge_penalty)
        self.max_iter = int(max_iter)
        self.tol = float(tol)

    def fit(self, source, target) -> FittedMap:
        X = as_values(source)
        Y = as_values(target)
        if Y.shape[0] != X.shape[0]:
            raise FitError("source and target must share stimuli")
        lambdas = np.zeros(X.shape[1])
        post_mean = np.zeros(X.shape[1])
        post_std = np.zeros(X.shape[1])
        U = np.empty_like(X)
        for j in range(X.shape[1]):
            try:
                params = yj_fit(X[:, j])
            except ValueError as exc:
                raise FitError(f"power transform failed for source neuron {j}: {exc}") from exc
            lambdas[j] = params.lambda_
            post_mean[j] = params.post_mean
            post_std[j] = params.post_std
            U[:, j] = yj_apply(params, X[:, j])
        link = Exponential()
        weights, intercepts, iters = _fit_glm_columns(
            U, Y, link, self.ridge_penalty, self.max_iter, self.tol
        )
        return FittedMap(
            kind=self.kind,
            params={
                "weights": weights,
                "intercept": intercepts,
                "yj_lambda": lambdas,
                "yj_mean": post_mean,
                "yj_std": post_std,
            },
            hyperparameters={
                "ridge_penalty": self.ridge_penalty,
                "max_iter": self.max_iter,
                "tol": self.tol,
            },
            diagnostics={
                "iterations": int(iters.max()),
                "mean_iterations": float(iters.mean()),
                "converged": True,
            },
        )

    @staticmethod
    def predict(fitted: FittedMap, source) -> np.ndarray:
        p = fitted.params
        X = as_values(source)
        W = p["weights"]
        if X.shape[1] != W.shape[0]:
            raise FitError(f"source has {X.shape[1]} neurons, map expects {W.shape[0]}")
        U = np.empty_like(X)
        for j in range(X.shape[1]):
            params = YeoJohnsonParams(
                lambda_=float(p["yj_lambda"][j]),
                post_mean=float(p["yj_mean"][j]),
                post_std=float(p["yj_std"][j]),
            )
            U[:, j] = yj_apply(params, X[:, j])
        return _predict_glm_columns(U, W, p["intercept"], Exponential())


def fit_exact_zippering(source, target, c=100.0, ridge_penalty=1e-8,
                        max_iter=100, tol=1e-8, invert_source=True) -> FittedMap:
    return ExactZipperingMethod(
        c=c, ridge_penalty=ridge_penalty, max_iter=max_iter, tol=tol,
        invert_source=invert_source,
    ).fit(source, target)


def fit_approx_zippering(source, target, ridge_penalty=1e-8,
                         max_iter=100, tol=1e-8) -> FittedMap:
    return ApproxZipperingMethod(
        ridge_penalty=ridge_penalty, max_iter=max_iter, tol=tol
    ).fit(source, target)
