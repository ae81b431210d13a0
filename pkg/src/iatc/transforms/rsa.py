"""Representational similarity: correlate representational dissimilarity matrices.

Not a predictive mapping; it rides along as a specificity benchmark. The
RDM of a response matrix is 1 - Pearson correlation between stimulus rows,
and two matrices are compared by correlating their RDM upper triangles.
"""
import numpy as np

from ..exceptions import FitError
from ..scores import pearson
from .base import as_values


def _rdm_upper(values, who):
    if values.shape[1] < 2:
        raise FitError(f"{who}: need at least 2 neurons to build an RDM")
    with np.errstate(invalid="ignore"):
        corr = np.corrcoef(values)
    iu = np.triu_indices(values.shape[0], k=1)
    vec = 1.0 - corr[iu]
    if not np.all(np.isfinite(vec)):
        raise FitError(f"{who}: RDM undefined (a stimulus row has zero variance)")
    if np.var(vec) == 0:
        raise FitError(f"{who}: zero-variance RDM")
    return vec


def rsa_score(a, b, squared=False) -> float:
    """Pearson correlation of the two RDM upper triangles, optionally squared."""
    va = as_values(a)
    vb = as_values(b)
    if va.shape[0] != vb.shape[0]:
        raise FitError("matrices must share the stimulus count")
    ra = _rdm_upper(va, "first matrix")
    rb = _rdm_upper(vb, "second matrix")
    r = pearson(ra, rb)
    return r * r if squared else r


class RsaComparator:
    """Pair scorer for the dissimilarity pipeline slots (no fitting, no split)."""

    def __init__(self, squared=False):
        self.squared = bool(squared)
        self.kind = "rsa_squared" if squared else "rsa"

    def pair_score(self, a, b) -> float:
        return rsa_score(a, b, squared=self.squared)
