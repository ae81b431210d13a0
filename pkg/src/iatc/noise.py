"""Trial-noise correction for predictivity scores.

Two flavors: bootstrap split-half correction with Spearman-Brown
reliability adjustment (electrophysiology-style, many trials), and
noise-ceiling division from per-neuron ncsnr (fMRI-style, few trials).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SplitSpec, TrialTensor, split_stimuli
from .scores import pearson_per_neuron

FAST_BOOTSTRAP = {"n_boot": 16, "n_splits": 1}


def spearman_brown(r):
    """Split-half reliability correction 2r / (1 + r) for r in (-1, 1]."""
    r = float(r)
    if r <= -1.0:
        raise ValueError("Spearman-Brown correction is undefined at r = -1")
    if r > 1.0 + 1e-12:
        raise ValueError(f"correlation {r} outside (-1, 1]")
    return 2.0 * min(r, 1.0) / (1.0 + min(r, 1.0))


def _sb_vector(r):
    """Elementwise Spearman-Brown; invalid entries (r <= -1, NaN) become NaN."""
    r = np.minimum(np.asarray(r, dtype=float), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * r / (1.0 + r)
    out[~(r > -1.0)] = np.nan
    return out


def split_half_average(trials: TrialTensor, rng):
    """Average the trials over a random half partition (sizes differ by <= 1)."""
    t = trials.values.shape[2]
    if t < 2:
        raise ValueError("need at least 2 trials to split")
    order = rng.permutation(t)
    half = t // 2
    m1 = trials.values[:, :, order[:half]].mean(axis=2)
    m2 = trials.values[:, :, order[half:]].mean(axis=2)
    return m1, m2


@dataclass
class BootstrapCorrectedScore:
    score: float
    raw_score: float
    n_samples: int
    excluded_neurons: int
    sample_scores: list = field(default_factory=list)


def corrected_predictivity_bootstrap(model, target_trials: TrialTensor, method,
                                     train_fraction=0.8, n_boot=100, n_splits=10,
                                     seed=0) -> BootstrapCorrectedScore:
    """Split-half bootstrap noise correction of model-to-target predictivity.

    For each train/test stimulus split and each bootstrap trial-half
    partition: fit the method from model responses to each half's
    trial averages, then score per neuron

        corr(pred_1, half_2) / sqrt(SB(corr(pred_1, pred_2)) * SB(corr(half_1, half_2)))

    on the test stimuli. Neurons whose denominator terms are nonpositive
    are excluded (and counted); the median over neurons is averaged over
    bootstrap samples and splits. ``raw_score`` is the same numerator with
    no denominator, so the correction can only raise it (the denominator
    is at most 1, with equality exactly when the trials are noiseless).
    """
    values = getattr(model, "values", model)
    values = np.asarray(values, dtype=float)
    s = values.shape[0]
    if target_trials.values.shape[0] != s:
        raise ValueError("model and target trials must share stimuli")

    sample_scores = []
    raw_scores = []
    excluded = 0
    for k in range(n_splits):
        split_seed = int(np.random.SeedSequence((seed, 0, k)).generate_state(1)[0])
        train, test = split_stimuli(s, SplitSpec(train_fraction, seed=split_seed))

        for b in range(n_boot):
            rng = np.random.default_rng(np.random.SeedSequence((seed, 1, k, b)))
            half1, half2 = split_half_average(target_trials, rng)
            fit1 = method.fit(values[train], half1[train])
            fit2 = method.fit(values[train], half2[train])
            pred1 = method.predict(fit1, values[test])
            pred2 = method.predict(fit2, values[test])

            num = pearson_per_neuron(pred1, half2[test])
            if np.any(np.isfinite(num)):
                raw_scores.append(float(np.nanmedian(num)))
            rel_pred = _sb_vector(pearson_per_neuron(pred1, pred2))
            rel_resp = _sb_vector(pearson_per_neuron(half1[test], half2[test]))
            denom_sq = rel_pred * rel_resp
            valid = np.isfinite(num) & np.isfinite(denom_sq) & (denom_sq > 0)
            excluded += int(np.sum(~valid))
            if not np.any(valid):
                continue
            ratio = num[valid] / np.sqrt(denom_sq[valid])
            sample_scores.append(float(np.median(ratio)))

    if not sample_scores:
        raise ValueError("no valid bootstrap samples (all neurons excluded)")
    return BootstrapCorrectedScore(
        score=float(np.mean(sample_scores)),
        raw_score=float(np.mean(raw_scores)),
        n_samples=len(sample_scores),
        excluded_neurons=excluded,
        sample_scores=sample_scores,
    )


def nc_ceiling(ncsnr, n_trials):
    """Noise ceiling ncsnr^2 / (ncsnr^2 + 1/n) per neuron."""
    ncsnr = np.asarray(ncsnr, dtype=float)
    if np.any(ncsnr < 0):
        raise ValueError("ncsnr must be nonnegative")
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    s2 = ncsnr**2
    return s2 / (s2 + 1.0 / n_trials)


def nc_corrected_r2(raw_r2, ceiling):
    """Elementwise raw / NC; neurons with NC = 0 become NaN (excluded).

    Corrected values may exceed 1 (noisy ceilings); they are reported
    unclipped.
    """
    raw_r2 = np.asarray(raw_r2, dtype=float)
    ceiling = np.asarray(ceiling, dtype=float)
    if raw_r2.shape != ceiling.shape:
        raise ValueError("shape mismatch between scores and ceilings")
    if np.any(ceiling < 0) or np.any(ceiling > 1):
        raise ValueError("ceilings must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = raw_r2 / ceiling
    out[ceiling == 0] = np.nan
    return out
