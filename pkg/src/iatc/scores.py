"""Column-wise scoring helpers shared by transforms, metrics, and noise correction."""
import numpy as np


def r2_per_neuron(y_true, y_pred):
    """1 - SSE/SS_tot per column, unclipped (negative values allowed).

    Columns with zero variance in ``y_true`` yield NaN; callers decide how
    to aggregate (medians here use nanmedian).
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
    sse = np.sum((y_true - y_pred) ** 2, axis=0)
    ss_tot = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = 1.0 - sse / ss_tot
    r2[ss_tot == 0] = np.nan
    return r2


def pearson_per_neuron(a, b):
    """Pearson correlation per column; zero-variance columns yield NaN."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    denom = np.sqrt(np.sum(ac**2, axis=0) * np.sum(bc**2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sum(ac * bc, axis=0) / denom
    r[denom == 0] = np.nan
    return r


def pearson(x, y):
    """Pearson correlation of two flat vectors."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    r = pearson_per_neuron(x[:, None], y[:, None])[0]
    return float(r)
