"""Pure-numpy coordinate descent for the lasso, mirroring the compiled kernel.

Objective: 0.5 * ||y - X w||^2 + alpha * ||w||_1, optionally with w >= 0.
Selected as a fallback when the compiled extension is unavailable (or when
IATC_PURE_PYTHON is set); semantics match ``_cd_fast`` to float accuracy.
"""
import numpy as np


def dual_gap(X, y, w, R, alpha, nonneg):
    """Duality gap of the current iterate; zero at the optimum."""
    r_norm2 = float(R @ R)
    xta = X.T @ R
    if nonneg:
        dual_norm = float(np.max(xta)) if xta.size else 0.0
    else:
        dual_norm = float(np.max(np.abs(xta))) if xta.size else 0.0
    if dual_norm > alpha and dual_norm > 0:
        const = alpha / dual_norm
        gap = 0.5 * (r_norm2 + const * const * r_norm2)
    else:
        const = 1.0
        gap = r_norm2
    gap += alpha * float(np.sum(np.abs(w))) - const * float(R @ y)
    return max(gap, 0.0)


def lasso_cd(X, y, alpha, w, nonneg, max_sweeps, gap_tol):
    """Cyclic coordinate descent; updates ``w`` in place.

    Returns (n_sweeps, gap, converged). Convergence means the duality gap
    dropped below ``gap_tol`` (an absolute threshold; callers scale it by
    ||y||^2).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_features = X.shape[1]
    col_norms = np.einsum("ij,ij->j", X, X)
    R = y - X @ w
    gap = np.inf
    n_sweeps = 0
    for n_sweeps in range(1, max_sweeps + 1):
        w_max = 0.0
        d_w_max = 0.0
        for j in range(n_features):
            if col_norms[j] == 0.0:
                continue
            w_j = w[j]
            if w_j != 0.0:
                R += w_j * X[:, j]
            rho = X[:, j] @ R
            if nonneg:
                new = max(rho - alpha, 0.0) / col_norms[j]
            else:
                new = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_norms[j]
            w[j] = new
            if new != 0.0:
                R -= new * X[:, j]
            d_w_max = max(d_w_max, abs(new - w_j))
            w_max = max(w_max, abs(new))
        if (
            w_max == 0.0
            or d_w_max / w_max < 1e-9
            or n_sweeps % 10 == 0
            or n_sweeps == max_sweeps
        ):
            gap = dual_gap(X, y, w, R, alpha, nonneg)
            if gap < gap_tol:
                return n_sweeps, gap, True
    return n_sweeps, gap, False
