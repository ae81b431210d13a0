"""Synthetic data generation.

Three pieces: (a) a threshold-crossing spiking model whose trial-mean
counts trace a smooth, softplus-like activation curve; (b) Gamma-based
Poisson-like sampling of softplus rates (shape = rate, scale = 1, rates
scaled by c to avoid tiny shapes); (c) a layered multi-subject population
with shared latents and per-subject well-conditioned mixing, so
pre-nonlinearity responses are exactly linearly related across subjects
while trial-averaged post-nonlinearity responses are not.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.special import ndtr

from .data import PopulationDataset, ResponseMatrix, ResponseProfile, TrialTensor
from .exceptions import SimulationError
from .softplus import softplus

# ---------------------------------------------------------------------------
# noisy spiking model


@dataclass
class SpikingConfig:
    mu: float = 0.0
    sigma: float = 1.0
    threshold: float = 0.0
    refractory_ms: float = 1.0
    window_ms: float = 100.0
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise SimulationError("sigma must be positive")
        ratio = self.window_ms / self.refractory_ms
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise SimulationError("window_ms / refractory_ms must be a positive integer")

    @property
    def bins(self):
        return int(round(self.window_ms / self.refractory_ms))


@dataclass
class SpikeCountSample:
    counts: np.ndarray  # per trial
    empirical_mean: float
    analytic_mean: float
    bins: int


def simulate_spike_counts(cfg: SpikingConfig) -> SpikeCountSample:
    """Count threshold crossings of Gaussian input per refractory bin.

    Each bin fires at most once (input above threshold); the analytic trial
    mean is bins * Phi((mu - threshold) / sigma).
    """
    rng = np.random.default_rng(cfg.seed)
    draws = rng.normal(cfg.mu, cfg.sigma, size=(cfg.trials, cfg.bins))
    counts = (draws > cfg.threshold).sum(axis=1).astype(float)
    analytic = cfg.bins * float(ndtr((cfg.mu - cfg.threshold) / cfg.sigma))
    return SpikeCountSample(
        counts=counts,
        empirical_mean=float(counts.mean()),
        analytic_mean=analytic,
        bins=cfg.bins,
    )


@dataclass
class SpikingCurve:
    mu_values: np.ndarray
    empirical_means: np.ndarray
    analytic_means: np.ndarray
    single_trial: np.ndarray
    trials: int
    bins: int


def spiking_curve(mu_values, sigma=1.0, threshold=0.0, refractory_ms=1.0,
                  window_ms=100.0, trials=100, seed=0) -> SpikingCurve:
    """Sweep the mean input over a grid and collect trial-mean spike counts."""
    mu_values = np.asarray(mu_values, dtype=float)
    emp = np.zeros(mu_values.size)
    ana = np.zeros(mu_values.size)
    single = np.zeros(mu_values.size)
    bins = None
    for i, mu in enumerate(mu_values):
        sample = simulate_spike_counts(SpikingConfig(
            mu=float(mu), sigma=sigma, threshold=threshold,
            refractory_ms=refractory_ms, window_ms=window_ms,
            trials=trials, seed=seed + i,
        ))
        emp[i] = sample.empirical_mean
        ana[i] = sample.analytic_mean
        single[i] = sample.counts[0]
        bins = sample.bins
    return SpikingCurve(mu_values, emp, ana, single, trials, bins)


# ---------------------------------------------------------------------------
# activation-curve candidates


@dataclass
class ActivationFit:
    name: str
    params: dict
    residual: float


def _lstsq_scale_shift(basis, y):
    """Best a * basis + d in least squares; returns (a, d, sse)."""
    G = np.column_stack([basis, np.ones_like(basis)])
    coef, _, _, _ = np.linalg.lstsq(G, y, rcond=None)
    sse = float(np.sum((G @ coef - y) ** 2))
    return float(coef[0]), float(coef[1]), sse


def _polish(residual_fn, x0):
    try:
        res = least_squares(residual_fn, x0, method="trf", max_nfev=2000)
        return res.x, float(np.sum(res.fun**2))
    except Exception:
        return np.asarray(x0, dtype=float), float(np.sum(residual_fn(np.asarray(x0)) ** 2))


def fit_activation_candidates(mu_grid, counts) -> dict:
    """Least-squares fits of scaled/translated softplus, ReLU, and exponential
    to trial-mean spike counts as a function of mean input.

    Each candidate is profiled over its shape parameters on a grid (output
    scale and offset solved in closed form), then polished with a local
    least-squares refinement. Returns name -> ActivationFit.
    """
    mu = np.asarray(mu_grid, dtype=float)
    y = np.asarray(counts, dtype=float)
    if mu.size != y.size:
        raise SimulationError("mu grid and counts must have equal length")
    if mu.size < 4:
        raise SimulationError("need at least 4 grid points")
    span = float(np.ptp(mu))
    if span <= 0:
        raise SimulationError("degenerate mu grid (zero range)")
    center = float(mu.mean())
    shift_grid = np.linspace(mu.min() - 0.5 * span, mu.max() + 0.5 * span, 25)

    fits = {}

    # softplus: a * softplus(b * (mu - m)) + d
    best = None
    for b in np.geomspace(0.5, 40.0, 25) / span:
        for m in shift_grid:
            a, d, sse = _lstsq_scale_shift(softplus(b * (mu - m)), y)
            if best is None or sse < best[-1]:
                best = ((a, b, m, d), sse)
    (a, b, m, d), sse = best

    def _res_softplus(p):
        return p[0] * softplus(p[1] * (mu - p[2])) + p[3] - y

    x, sse_p = _polish(_res_softplus, [a, b, m, d])
    if sse_p < sse:
        (a, b, m, d), sse = (tuple(x), sse_p)
    fits["softplus"] = ActivationFit("softplus", {"a": a, "b": b, "m": m, "d": d}, sse)

    # relu: a * max(0, mu - m) + d  (input scale is redundant with a)
    best = None
    for m in np.linspace(mu.min() - 0.5 * span, mu.max() + 0.5 * span, 1001):
        a, d, sse = _lstsq_scale_shift(np.maximum(0.0, mu - m), y)
        if best is None or sse < best[-1]:
            best = ((a, m, d), sse)
    (a, m, d), sse = best

    def _res_relu(p):
        return p[0] * np.maximum(0.0, mu - p[1]) + p[2] - y

    x, sse_p = _polish(_res_relu, [a, m, d])
    if sse_p < sse:
        (a, m, d), sse = (tuple(x), sse_p)
    fits["relu"] = ActivationFit("relu", {"a": a, "m": m, "d": d}, sse)

    # exponential: a * exp(b * (mu - center)) + d  (input shift folds into a)
    best = None
    for b in np.geomspace(0.05, 20.0, 200) / span:
        a, d, sse = _lstsq_scale_shift(np.exp(b * (mu - center)), y)
        if best is None or sse < best[-1]:
            best = ((a, b, d), sse)
    (a, b, d), sse = best

    def _res_exp(p):
        return p[0] * np.exp(np.minimum(p[1] * (mu - center), 50.0)) + p[2] - y

    x, sse_p = _polish(_res_exp, [a, b, d])
    if sse_p < sse:
        (a, b, d), sse = (tuple(x), sse_p)
    fits["exponential"] = ActivationFit("exponential", {"a": a, "b": b, "d": d}, sse)

    return fits


# ---------------------------------------------------------------------------
# Gamma-as-Poisson sampling


@dataclass
class NoisySample:
    rates: np.ndarray  # (S, N), c * softplus(pre)
    counts: np.ndarray  # (S, N, trials)

    @property
    def trial_mean(self):
        return self.counts.mean(axis=2)


def sample_noisy_softplus(pre, c=100.0, trials=50, seed=0) -> NoisySample:
    """Gamma(shape = c * softplus(pre), scale = 1) samples per trial.

    The Gamma stand-in reproduces the two Poisson properties the
    downstream GLMs rely on: nonnegative samples and variance equal to the
    mean. Scaling by c keeps shapes away from the tiny-k regime.
    """
    values = getattr(pre, "values", pre)
    values = np.asarray(values, dtype=float)
    if c <= 0:
        raise SimulationError("scale c must be positive")
    if trials < 1:
        raise SimulationError("need at least one trial")
    rates = c * softplus(values)
    rng = np.random.default_rng(seed)
    counts = rng.gamma(shape=rates[:, :, None], scale=1.0,
                       size=rates.shape + (int(trials),))
    return NoisySample(rates=rates, counts=counts)


# ---------------------------------------------------------------------------
# layered multi-subject population


@dataclass
class PopulationConfig:
    layers: int = 3
    latent_dims: object = 48  # int, or one per layer
    neurons: int = 60
    subjects: int = 4
    stimuli: int = 2000
    teacher_seed: int = 0
    subject_seeds: list | None = None
    c: float = 100.0
    trials: int = 50
    kappa_max: float = 30.0
    pre_gain: float = 2.0
    attach_trials: bool = False

    def __post_init__(self):
        if self.layers < 1 or self.subjects < 1 or self.neurons < 1:
            raise SimulationError("layers, subjects, and neurons must be positive")
        if self.stimuli < 4:
            raise SimulationError("need at least 4 stimuli")
        if self.c <= 0 or self.trials < 1 or self.kappa_max <= 1:
            raise SimulationError("invalid c / trials / kappa_max")
        if isinstance(self.latent_dims, (int, np.integer)):
            self.latent_dims = [int(self.latent_dims)] * self.layers
        else:
            self.latent_dims = [int(d) for d in self.latent_dims]
        if len(self.latent_dims) != self.layers or any(d < 1 for d in self.latent_dims):
            raise SimulationError("latent_dims must give a positive size per layer")
        if self.subject_seeds is not None:
            self.subject_seeds = [int(s) for s in self.subject_seeds]
            if len(self.subject_seeds) != self.subjects:
                raise SimulationError("subject_seeds length must equal subjects")


def _standardize(a):
    return (a - a.mean(axis=0)) / a.std(axis=0)


def _teacher_latents(cfg: PopulationConfig):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.teacher_seed))
    latents = [rng.normal(size=(cfg.stimuli, cfg.latent_dims[0]))]
    for layer in range(1, cfg.layers):
        w = rng.normal(size=(cfg.latent_dims[layer - 1], cfg.latent_dims[layer]))
        w /= np.sqrt(cfg.latent_dims[layer - 1])
        latents.append(_standardize(softplus(latents[-1] @ w)))
    return latents


def _mixing_matrix(rng, d, n, kappa_max):
    for _ in range(100):
        a = rng.normal(size=(d, n))
        if np.linalg.cond(a) <= kappa_max:
            return a
    raise SimulationError(
        f"mixing matrix condition number stayed above {kappa_max} after 100 draws"
    )


def generate_population(cfg: PopulationConfig) -> PopulationDataset:
    """Build the shared-latent population with pre- and post-nonlinearity profiles.

    Every subject sees the same teacher latents through its own
    well-conditioned mixing, so same-layer pre-nonlinearity responses are
    exactly linearly related across subjects. Post-nonlinearity profiles
    store the trial average of Gamma(c * softplus(pre)) counts; the scale c
    rides in the dataset metadata for the unscale-then-invert transforms.
    """
    latents = _teacher_latents(cfg)
    if cfg.subject_seeds is not None:
        subject_seeds = list(cfg.subject_seeds)
    else:
        subject_seeds = [
            int(np.random.SeedSequence((cfg.teacher_seed, 1, i)).generate_state(1)[0])
            for i in range(cfg.subjects)
        ]
    stimulus_ids = tuple(f"stim{i:05d}" for i in range(cfg.stimuli))

    profiles = []
    for si in range(cfg.subjects):
        subject = f"subject{si:02d}"
        rng = np.random.default_rng(subject_seeds[si])
        for layer in range(cfg.layers):
            area = f"layer{layer + 1}"
            level = float(layer + 1)
            neuron_ids = tuple(f"{subject}_{area}_n{k:03d}" for k in range(cfg.neurons))
            mixing = _mixing_matrix(rng, cfg.latent_dims[layer], cfg.neurons, cfg.kappa_max)
            mixing = mixing * (cfg.pre_gain / np.sqrt(cfg.latent_dims[layer]))
            bias = 0.1 * rng.normal(size=cfg.neurons)
            pre = latents[layer] @ mixing + bias

            rates = cfg.c * softplus(pre)
            counts = rng.gamma(shape=rates[:, :, None], scale=1.0,
                               size=rates.shape + (cfg.trials,))
            post = counts.mean(axis=2)

            profiles.append(ResponseProfile(
                matrix=ResponseMatrix(pre, stimulus_ids, neuron_ids),
                subject_id=subject, area_id=area, hierarchy_level=level,
                stage="pre_nl",
            ))
            profiles.append(ResponseProfile(
                matrix=ResponseMatrix(post, stimulus_ids, neuron_ids),
                subject_id=subject, area_id=area, hierarchy_level=level,
                stage="post_nl",
                trials=TrialTensor(counts, stimulus_ids, neuron_ids, counts=True)
                if cfg.attach_trials else None,
            ))

    return PopulationDataset(
        profiles=profiles,
        stimulus_ids=stimulus_ids,
        metadata={
            "c": cfg.c,
            "trials": cfg.trials,
            "teacher_seed": cfg.teacher_seed,
            "subject_seeds": subject_seeds,
            "layers": cfg.layers,
            "latent_dims": list(cfg.latent_dims),
            "pre_gain": cfg.pre_gain,
            "kappa_max": cfg.kappa_max,
        },
    )


def spurious_model_variant(profile: ResponseProfile, extra_noise_neurons, seed=0) -> ResponseProfile:
    """Copy a profile with independent Gaussian-noise neuron columns appended.

    The noise standard deviation matches the profile's mean per-neuron
    spread, so the extra columns look plausible in scale but carry no
    stimulus information.
    """
    if extra_noise_neurons < 0:
        raise SimulationError("extra_noise_neurons must be nonnegative")
    values = profile.matrix.values
    if extra_noise_neurons == 0:
        extended = values.copy()
        neuron_ids = profile.matrix.neuron_ids
    else:
        rng = np.random.default_rng(seed)
        scale = float(values.std(axis=0).mean())
        noise = rng.normal(0.0, scale if scale > 0 else 1.0,
                           size=(values.shape[0], int(extra_noise_neurons)))
        extended = np.hstack([values, noise])
        neuron_ids = profile.matrix.neuron_ids + tuple(
            f"noise{k:03d}" for k in range(int(extra_noise_neurons))
        )
    return ResponseProfile(
        matrix=ResponseMatrix(extended, profile.matrix.stimulus_ids, neuron_ids),
        subject_id=profile.subject_id,
        area_id=profile.area_id,
        hierarchy_level=profile.hierarchy_level,
        stage=profile.stage,
    )
