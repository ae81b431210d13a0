"""Scoring layer: predictivity, bidirectional dissimilarity, specificity,
hierarchy correlation, MDS embedding, and model-separation statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ResponseProfile, SplitSpec, split_stimuli
from .exceptions import FitError
from .scores import r2_per_neuron


def predictivity_per_neuron(source: ResponseProfile, target: ResponseProfile,
                            method, split: SplitSpec):
    """Per-target-neuron held-out R^2 under a transform fitted on the train split."""
    if source.matrix.stimulus_ids != target.matrix.stimulus_ids:
        raise FitError("profiles must share stimuli in identical order")
    train, test = split_stimuli(source.matrix.n_stimuli, split)
    fitted = method.fit(source.matrix.values[train], target.matrix.values[train])
    pred = method.predict(fitted, source.matrix.values[test])
    return r2_per_neuron(target.matrix.values[test], pred)


def predictivity(source: ResponseProfile, target: ResponseProfile,
                 method, split: SplitSpec) -> float:
    """Median across target neurons of held-out R^2."""
    r2 = predictivity_per_neuron(source, target, method, split)
    if np.all(np.isnan(r2)):
        raise FitError("every target neuron has zero test variance")
    return float(np.nanmedian(r2))


def bidirectional_score(a: ResponseProfile, b: ResponseProfile,
                        method, split: SplitSpec) -> float:
    """Mean of the two mapping directions."""
    return 0.5 * (predictivity(a, b, method, split) + predictivity(b, a, method, split))


@dataclass
class DissimilarityMatrix:
    labels: list  # (subject_id, area_id) per row
    values: np.ndarray  # symmetric, zero diagonal

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        k = len(self.labels)
        if self.values.shape != (k, k):
            raise ValueError("matrix shape must match label count")


def dissimilarity_matrix(profiles, method, split: SplitSpec) -> DissimilarityMatrix:
    """Pairwise 1 - bidirectional score over all (subject, area) profiles.

    ``profiles`` is a sequence of response profiles or a whole dataset
    (which must then hold a single stage per (subject, area)). ``method``
    is either a mapping method (bidirectional predictivity) or a pair
    scorer exposing ``pair_score`` (RSA). Scores above 1 are clamped
    before the subtraction; negative scores give dissimilarities above 1,
    which downstream consumers take as-is.
    """
    profiles = getattr(profiles, "profiles", profiles)
    profiles = sorted(profiles, key=lambda p: p.label)
    if len(profiles) < 2:
        raise FitError("need at least 2 profiles")
    labels = [p.label for p in profiles]
    if len(set(labels)) != len(labels):
        raise FitError("duplicate (subject, area) profile labels")
    k = len(profiles)
    values = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            if hasattr(method, "pair_score"):
                score = method.pair_score(profiles[i].matrix, profiles[j].matrix)
            else:
                score = bidirectional_score(profiles[i], profiles[j], method, split)
            d = 1.0 - min(score, 1.0)
            values[i, j] = values[j, i] = d
    return DissimilarityMatrix(labels=labels, values=values)


@dataclass
class SpecificityReport:
    silhouette_mean: float
    silhouettes: list = field(default_factory=list)  # (label, value) per profile
    hierarchy_correlation: float | None = None


def silhouette_specificity(d: DissimilarityMatrix, area_of) -> SpecificityReport:
    """Mean silhouette s(i) = (b(i) - a(i)) / max(a(i), b(i)).

    a(i): mean dissimilarity to other profiles of the same area.
    b(i): mean dissimilarity to profiles of all other areas.
    """
    areas = [area_of[label] for label in d.labels]
    counts = {}
    for a in areas:
        counts[a] = counts.get(a, 0) + 1
    singles = sorted(a for a, c in counts.items() if c < 2)
    if singles:
        raise FitError(f"areas with a single profile cannot be scored: {singles}")
    if len(counts) < 2:
        raise FitError("need at least 2 areas")

    sil = []
    for i, label in enumerate(d.labels):
        same = [j for j in range(len(areas)) if j != i and areas[j] == areas[i]]
        other = [j for j in range(len(areas)) if areas[j] != areas[i]]
        a_i = float(np.mean(d.values[i, same]))
        b_i = float(np.mean(d.values[i, other]))
        denom = max(a_i, b_i)
        sil.append((label, (b_i - a_i) / denom if denom > 0 else 0.0))
    return SpecificityReport(
        silhouette_mean=float(np.mean([s for _, s in sil])),
        silhouettes=sil,
    )


def hierarchy_correlation(d: DissimilarityMatrix, level_of) -> float:
    """Pearson correlation between dissimilarity and |hierarchy level difference|
    across unordered profile pairs (same-area pairs contribute distance 0)."""
    k = len(d.labels)
    if k * (k - 1) // 2 < 3:
        raise FitError("need at least 3 profile pairs")
    xs, ys = [], []
    for i in range(k):
        for j in range(i + 1, k):
            xs.append(abs(level_of[d.labels[i]] - level_of[d.labels[j]]))
            ys.append(d.values[i, j])
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise FitError("zero variance in levels or dissimilarities")
    return float(np.corrcoef(xs, ys)[0, 1])


@dataclass
class MdsResult:
    coords: np.ndarray
    stress: float
    stress_trace: list


def mds_embed(d: DissimilarityMatrix, dims=2, seed=0, max_iter=300, tol=1e-9) -> MdsResult:
    """Metric SMACOF stress majorization from a seeded random start.

    The Guttman update guarantees a non-increasing raw stress
    sum_{i<j} (d_ij - dist_ij)^2; iteration stops on relative stress change
    below ``tol`` or at ``max_iter``.
    """
    D = np.asarray(d.values, dtype=float)
    if not np.allclose(D, D.T) or np.any(np.diag(D) != 0):
        raise ValueError("dissimilarity matrix must be symmetric with a zero diagonal")
    k = D.shape[0]
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(k, dims))

    def distances(X):
        diff = X[:, None, :] - X[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=2))

    def stress_of(dist):
        iu = np.triu_indices(k, 1)
        return float(np.sum((D[iu] - dist[iu]) ** 2))

    dist = distances(X)
    stress = stress_of(dist)
    trace = [stress]
    for _ in range(max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, D / dist, 0.0)
        np.fill_diagonal(ratio, 0.0)
        B = -ratio
        np.fill_diagonal(B, ratio.sum(axis=1))
        X = (B @ X) / k
        dist = distances(X)
        new_stress = stress_of(dist)
        trace.append(new_stress)
        if stress > 0 and (stress - new_stress) / stress < tol:
            stress = new_stress
            break
        stress = new_stress
        if stress == 0:
            break
    return MdsResult(coords=X, stress=stress, stress_trace=trace)


def model_separation(scores) -> float:
    """Mean absolute difference in assessed similarity between models,
    averaged over model pairs and layers.

    ``scores`` maps model name -> per-layer score sequence; all sequences
    must have the same length.
    """
    names = sorted(scores)
    if len(names) < 2:
        raise ValueError("need at least 2 models")
    table = [np.asarray(scores[m], dtype=float) for m in names]
    lengths = {t.size for t in table}
    if len(lengths) != 1:
        raise ValueError(f"models have mismatched layer counts: {sorted(lengths)}")
    diffs = []
    for i in range(len(table)):
        for j in range(i + 1, len(table)):
            diffs.append(np.abs(table[i] - table[j]))
    return float(np.mean(diffs))
