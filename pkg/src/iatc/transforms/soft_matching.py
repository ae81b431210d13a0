"""Soft matching: optimal-transport correspondence between individual neurons.

Fitting computes the train-set correlation matrix C between source and
target neurons and maximizes sum_ij T_ij C_ij over transport plans T with
uniform marginals (rows 1/N_x, columns 1/N_y). The solver is entropic
scaling in the log domain with a geometric epsilon schedule, followed by
rounding to exactly feasible marginals. The plan doubles as a predictive
mapping: each target neuron is predicted as the plan-weighted expectation
of per-source-neuron least-squares lines.
"""
from __future__ import annotations

import numpy as np
from ..exceptions import ConvergenceError, FitError
from .base import FittedMap, MappingMethod, as_values, register

_EPSILON_FRACTION = 0.01  # of the correlation range, per default


def _entropic_plan(C, epsilon, max_iter, tol):
    """Maximize <T, C> with uniform marginals via entropic scaling iterations.

    Three layers of machinery, all needed because the default epsilon is a
    small fraction of the correlation range: linear-domain scaling updates
    with the running potentials absorbed into the kernel whenever the
    scalings grow; a geometric epsilon schedule for warm starts; and a
    damped Newton refinement of the dual potentials for instances where the
    plain iteration's linear rate degenerates (near-ties in the costs).
    Column marginals are exact after every scaling sweep, so convergence is
    measured on the row marginals (and on both after Newton).
    """
    nx, ny = C.shape
    a = np.full(nx, 1.0 / nx)
    b = np.full(ny, 1.0 / ny)

    eps_start = max(epsilon, 0.25 * (C.max() - C.min()) + 1e-12)
    schedule = [eps_start]
    while schedule[-1] > epsilon * 1.0001:
        schedule.append(max(schedule[-1] * 0.7, epsilon))

    f = np.zeros(nx)
    g = np.zeros(ny)
    total = 0
    for eps in schedule:
        last_stage = eps <= epsilon * 1.0001
        K = np.exp((C + f[:, None] + g[None, :]) / eps)
        u = np.ones(nx)
        v = np.ones(ny)
        budget = max_iter if last_stage else min(1000, max_iter)
        for it in range(1, budget + 1):
            total += 1
            Kv = np.maximum(K @ v, 1e-300)
            violation = float(np.max(np.abs(u * Kv - a)))
            if violation < tol:
                break
            u = a / Kv
            v = b / np.maximum(K.T @ u, 1e-300)
            if it % 200 == 0 or u.max() > 1e150 or v.max() > 1e150:
                f = f + eps * np.log(u)
                g = g + eps * np.log(v)
                K = np.exp((C + f[:, None] + g[None, :]) / eps)
                u[:] = 1.0
                v[:] = 1.0
        f = f + eps * np.log(u)
        g = g + eps * np.log(v)

    def marginals(f, g):
        T = np.exp((C + f[:, None] + g[None, :]) / epsilon)
        return T, T.sum(axis=1), T.sum(axis=0)

    T, rows, cols = marginals(f, g)
    violation = max(float(np.abs(rows - a).max()), float(np.abs(cols - b).max()))
    for _ in range(100):
        if violation < tol:
            break
        residual = np.concatenate([rows - a, cols - b])
        jac = np.zeros((nx + ny, nx + ny))
        jac[:nx, :nx] = np.diag(rows)
        jac[:nx, nx:] = T
        jac[nx:, :nx] = T.T
        jac[nx:, nx:] = np.diag(cols)
        jac /= epsilon
        # potentials are defined up to an additive constant; lstsq picks the
        # minimum-norm step through that null direction
        delta = np.linalg.lstsq(jac, -residual, rcond=None)[0]
        step = 1.0
        improved = False
        for _ in range(40):
            f2 = f + step * delta[:nx]
            g2 = g + step * delta[nx:]
            T2, r2, c2 = marginals(f2, g2)
            v2 = max(float(np.abs(r2 - a).max()), float(np.abs(c2 - b).max()))
            if np.isfinite(v2) and v2 < violation:
                f, g, T, rows, cols, violation = f2, g2, T2, r2, c2, v2
                improved = True
                break
            step *= 0.5
        if not improved:
            break

    if violation >= tol:
        raise ConvergenceError(
            f"entropic scaling did not reach marginal tolerance {tol:.1e} "
            f"(violation {violation:.3e} after {total} scaling iterations "
            "plus Newton refinement)"
        )
    return T


def _round_to_marginals(T, a, b):
    """Project a near-feasible plan onto the exact transport polytope."""
    rows = T.sum(axis=1)
    T = T * np.minimum(1.0, np.divide(a, rows, out=np.ones_like(rows), where=rows > 0))[:, None]
    cols = T.sum(axis=0)
    T = T * np.minimum(1.0, np.divide(b, cols, out=np.ones_like(cols), where=cols > 0))[None, :]
    err_a = a - T.sum(axis=1)
    err_b = b - T.sum(axis=0)
    deficit = err_a.sum()
    if deficit > 0:
        T = T + np.outer(err_a, err_b) / deficit
    return T


@register
class SoftMatchingMethod(MappingMethod):
    kind = "soft_matching"

    def __init__(self, epsilon=None, max_iter=5000, tol=1e-9):
        self.epsilon = epsilon if epsilon is None else float(epsilon)
        self.max_iter = int(max_iter)
        self.tol = float(tol)

    def fit(self, source, target) -> FittedMap:
        X = as_values(source)
        Y = as_values(target)
        n = X.shape[0]
        if Y.shape[0] != n:
            raise FitError("source and target must share stimuli")
        if n < 3:
            raise FitError(f"need at least 3 training stimuli, got {n}")
        x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
        x_std, y_std = X.std(axis=0), Y.std(axis=0)
        for name, std in (("source", x_std), ("target", y_std)):
            if np.any(std == 0):
                idx = int(np.argmax(std == 0))
                raise FitError(f"{name} neuron {idx} has zero variance on the training stimuli")

        Zx = (X - x_mean) / x_std
        Zy = (Y - y_mean) / y_std
        C = Zx.T @ Zy / n

        nx, ny = C.shape
        a = np.full(nx, 1.0 / nx)
        b = np.full(ny, 1.0 / ny)
        c_range = float(C.max() - C.min())
        if c_range < 1e-12:
            T = np.outer(a, b)  # every feasible plan is optimal
            iterations = 0
        else:
            epsilon = self.epsilon if self.epsilon is not None else _EPSILON_FRACTION * c_range
            T = _entropic_plan(C, epsilon, self.max_iter, self.tol)
            iterations = 1
            T = _round_to_marginals(T, a, b)
        score = float(np.sum(T * C))
        return FittedMap(
            kind=self.kind,
            params={
                "transport": T,
                "correlations": C,
                "x_mean": x_mean,
                "x_std": x_std,
                "y_mean": y_mean,
                "y_std": y_std,
            },
            hyperparameters={
                "epsilon": self.epsilon,
                "max_iter": self.max_iter,
                "tol": self.tol,
            },
            diagnostics={"score": score, "iterations": iterations, "converged": True},
        )

    @staticmethod
    def predict(fitted: FittedMap, source) -> np.ndarray:
        p = fitted.params
        X = as_values(source)
        T, C = p["transport"], p["correlations"]
        if X.shape[1] != T.shape[0]:
            raise FitError(f"source has {X.shape[1]} neurons, map expects {T.shape[0]}")
        ny = T.shape[1]
        Z = (X - p["x_mean"]) / p["x_std"]
        return ny * (Z @ (T * C)) * p["y_std"] + p["y_mean"]


def fit_soft_matching(source, target, epsilon=None, max_iter=5000, tol=1e-9) -> FittedMap:
    return SoftMatchingMethod(epsilon=epsilon, max_iter=max_iter, tol=tol).fit(source, target)


def predict_soft_matching(fitted: FittedMap, source) -> np.ndarray:
    if fitted.kind != "soft_matching":
        raise FitError(f"expected a soft_matching map, got {fitted.kind!r}")
    return SoftMatchingMethod.predict(fitted, source)


def soft_matching_score(fitted: FittedMap) -> float:
    """The optimized objective sum_ij T_ij C_ij (expected correlation)."""
    return float(np.sum(fitted.params["transport"] * fitted.params["correlations"]))
