"""Poisson generalized linear model fitted by iteratively reweighted least squares.

Supports two inverse links: a scaled softplus mu = c * softplus(eta) and the
exponential mu = exp(eta). The softplus link is non-canonical, so Fisher
scoring uses the expected information (weights (dmu/deta)^2 / mu), which is
always positive definite. Step-halving keeps the deviance trace monotone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError
from .softplus import softplus, softplus_derivative, softplus_inverse

MU_FLOOR = 1e-10
_ETA_MAX = 300.0  # exp link guard; exp(300) ~ 2e130 stays finite


class ScaledSoftplus:
    """Inverse link mu(eta) = c * softplus(eta)."""

    kind = "scaled_softplus"

    def __init__(self, c=100.0):
        c = float(c)
        if c <= 0:
            raise ValueError("scale c must be positive")
        self.c = c

    def mu(self, eta):
        return self.c * softplus(eta)

    def dmu(self, eta):
        return self.c * softplus_derivative(eta)

    def eta_for_mean(self, mean):
        return softplus_inverse(mean / self.c)

    def spec(self):
        return {"kind": self.kind, "c": self.c}


class Exponential:
    """Inverse link mu(eta) = exp(eta), the canonical Poisson (log) link."""

    kind = "exponential"

    def mu(self, eta):
        return np.exp(np.minimum(eta, _ETA_MAX))

    def dmu(self, eta):
        return np.exp(np.minimum(eta, _ETA_MAX))

    def eta_for_mean(self, mean):
        return np.log(mean)

    def spec(self):
        return {"kind": self.kind}


def make_link(kind, c=100.0):
    if kind == "scaled_softplus":
        return ScaledSoftplus(c)
    if kind == "exponential":
        return Exponential()
    raise ValueError(f"unknown inverse link {kind!r}")


def link_from_spec(spec):
    return make_link(spec["kind"], c=spec.get("c", 100.0))


@dataclass
class GlmFit:
    coef: np.ndarray
    intercept: float
    deviance_trace: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0


def poisson_deviance(y, mu):
    """2 * sum( y*log(y/mu) - (y - mu) ), with the y=0 term equal to mu."""
    mu = np.maximum(mu, MU_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(np.maximum(y, MU_FLOOR) / mu), 0.0) - (y - mu)
    return 2.0 * float(np.sum(term))


def irls_fit(X, y, link, ridge_penalty=1e-8, max_iter=100, tol=1e-8) -> GlmFit:
    """Fit a Poisson GLM by Fisher-scoring IRLS.

    Parameters
    ----------
    X : (S, P) design (an intercept column is appended internally).
    y : (S,) nonnegative responses.
    link : inverse link object (``ScaledSoftplus`` or ``Exponential``).
    ridge_penalty : L2 penalty on the weights; the intercept is never
        penalized. A small positive default keeps the normal equations
        well posed even for S <= P.
    max_iter, tol : stop when the relative deviance change drops below
        ``tol``; hitting ``max_iter`` first raises ``ConvergenceError``.

    Returns
    -------
    GlmFit with coefficients, intercept, deviance trace, and flags.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (S, P) with one row per response")
    if np.any(y < 0):
        raise ValueError("Poisson responses must be nonnegative")
    n, p = X.shape
    Xd = np.hstack([X, np.ones((n, 1))])
    penalty = np.full(p + 1, 2.0 * ridge_penalty)
    penalty[-1] = 0.0

    theta = np.zeros(p + 1)
    theta[-1] = float(link.eta_for_mean(max(float(y.mean()), 1e-6)))
    eta = Xd @ theta
    mu = link.mu(eta)
    dev = poisson_deviance(y, mu)
    trace = [dev]
    converged = False
    n_iter = 0
    abs_floor = max(1e-12 * n, 1e-300)

    for n_iter in range(1, max_iter + 1):
        mu_safe = np.maximum(mu, MU_FLOOR)
        dmu = link.dmu(eta)
        dmu_safe = np.maximum(dmu, MU_FLOOR)
        w = dmu * dmu / mu_safe
        z = eta + (y - mu) / dmu_safe
        WX = Xd * w[:, None]
        H = Xd.T @ WX
        H[np.diag_indices_from(H)] += penalty
        rhs = WX.T @ z
        try:
            theta_new = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            theta_new = np.linalg.lstsq(H, rhs, rcond=None)[0]
        step = theta_new - theta

        accepted = False
        scale = 1.0
        for _ in range(11):  # full step plus up to 10 halvings
            cand = theta + scale * step
            eta_c = Xd @ cand
            mu_c = link.mu(eta_c)
            dev_c = poisson_deviance(y, mu_c)
            if np.isfinite(dev_c) and dev_c <= dev:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # No descent direction left at float precision: stationary.
            converged = True
            break

        rel_drop = (dev - dev_c) / (abs(dev) + 1e-12)
        theta, eta, mu, dev = cand, eta_c, mu_c, dev_c
        trace.append(dev)
        if rel_drop < tol or dev <= abs_floor or np.all(mu <= MU_FLOOR * (1 + 1e-9)):
            converged = True
            break

    if not converged:
        raise ConvergenceError(
            f"IRLS did not converge in {max_iter} iterations "
            f"(last deviance {trace[-1]:.6g})",
            trace=trace,
        )
    return GlmFit(
        coef=theta[:-1].copy(),
        intercept=float(theta[-1]),
        deviance_trace=trace,
        converged=True,
        n_iter=n_iter,
    )


def glm_predict(fit: GlmFit, X, link):
    """Evaluate mu(X @ coef + intercept)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fit.coef.size:
        raise ValueError(
            f"design has {X.shape[1] if X.ndim == 2 else '?'} columns, "
            f"fit expects {fit.coef.size}"
        )
    return link.mu(X @ fit.coef + fit.intercept)
