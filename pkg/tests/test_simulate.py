import numpy as np
import pytest
from scipy.special import ndtr

from iatc.data import SplitSpec
from iatc.exceptions import SimulationError
from iatc.metrics import predictivity
from iatc.simulate import (
    PopulationConfig,
    SpikingConfig,
    fit_activation_candidates,
    generate_population,
    sample_noisy_softplus,
    simulate_spike_counts,
    spiking_curve,
    spurious_model_variant,
)
from iatc.softplus import softplus
from iatc.transforms import (
    ApproxZipperingMethod,
    ExactZipperingMethod,
    RidgeMethod,
)

SPLIT = SplitSpec(0.8, seed=2)


class TestSpikingModel:
    def binomial_3se(self, cfg, p):
        return 3 * np.sqrt(cfg.bins * p * (1 - p) / cfg.trials)

    def test_at_threshold_mean_is_half_the_bins(self):
        cfg = SpikingConfig(mu=0.0, sigma=1.0, threshold=0.0, trials=400, seed=0)
        out = simulate_spike_counts(cfg)
        assert out.analytic_mean == pytest.approx(50.0)
        assert abs(out.empirical_mean - 50.0) < self.binomial_3se(cfg, 0.5)

    def test_far_above_threshold_saturates(self):
        out = simulate_spike_counts(SpikingConfig(mu=8.0, sigma=1.0, threshold=0.0, seed=1))
        assert out.empirical_mean == pytest.approx(100.0, abs=0.5)

    def test_far_below_threshold_silent(self):
        out = simulate_spike_counts(SpikingConfig(mu=-8.0, sigma=1.0, threshold=0.0, seed=2))
        assert out.empirical_mean == pytest.approx(0.0, abs=0.5)

    def test_curve_matches_analytic_within_3se(self):
        mu = np.linspace(-3.0, 1.0, 17)
        curve = spiking_curve(mu, sigma=1.0, threshold=0.0, trials=300, seed=3)
        p = ndtr(mu)
        se3 = 3 * np.sqrt(100 * p * (1 - p) / 300)
        assert np.all(np.abs(curve.empirical_means - curve.analytic_means) <= se3 + 1e-9)

    def test_non_integer_bin_count_rejected(self):
        with pytest.raises(SimulationError, match="positive integer"):
            SpikingConfig(window_ms=100.0, refractory_ms=3.0)


class TestActivationCandidates:
    def test_subthreshold_ordering_softplus_wins(self):
        mu = np.linspace(-3.0, 1.0, 33)
        curve = spiking_curve(mu, sigma=1.0, threshold=0.0, trials=400, seed=4)
        fits = fit_activation_candidates(mu, curve.empirical_means)
        assert fits["softplus"].residual < fits["relu"].residual
        assert fits["softplus"].residual < fits["exponential"].residual

    def test_exact_softplus_counts_fit_perfectly(self):
        mu = np.linspace(-2.0, 2.0, 25)
        counts = 30.0 * softplus(1.3 * (mu - 0.2)) + 5.0
        fits = fit_activation_candidates(mu, counts)
        assert fits["softplus"].residual < 1e-8 * np.sum(counts**2)

    def test_constant_counts_all_equal(self):
        mu = np.linspace(-1.0, 1.0, 11)
        counts = np.full(11, 4.2)
        fits = fit_activation_candidates(mu, counts)
        for f in fits.values():
            assert f.residual == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_grid_rejected(self):
        with pytest.raises(SimulationError, match="zero range"):
            fit_activation_candidates(np.ones(10), np.ones(10))
        with pytest.raises(SimulationError, match="at least 4"):
            fit_activation_candidates(np.arange(3.0), np.arange(3.0))


class TestGammaSampling:
    def test_mean_converges_to_rate(self):
        rng = np.random.default_rng(5)
        pre = rng.normal(size=(5, 4))
        sample = sample_noisy_softplus(pre, c=100.0, trials=10_000, seed=6)
        rel = np.abs(sample.trial_mean - sample.rates) / sample.rates
        assert rel.max() < 0.02

    def test_variance_mean_ratio_near_one(self):
        rng = np.random.default_rng(7)
        pre = rng.uniform(-1.0, 2.0, size=(5, 4))
        sample = sample_noisy_softplus(pre, c=100.0, trials=10_000, seed=8)
        ratio = sample.counts.var(axis=2) / sample.counts.mean(axis=2)
        assert np.abs(ratio - 1.0).max() < 0.05

    def test_very_negative_pre_gives_tiny_counts(self):
        pre = np.full((3, 2), -30.0)
        sample = sample_noisy_softplus(pre, c=100.0, trials=50, seed=9)
        assert sample.counts.max() < 1e-6
        assert np.all(sample.counts >= 0)


@pytest.fixture(scope="module")
def small_population():
    cfg = PopulationConfig(layers=2, latent_dims=24, neurons=30, subjects=2,
                           stimuli=500, teacher_seed=21, trials=50, pre_gain=2.0)
    return generate_population(cfg)


class TestGeneratePopulation:
    def test_bitwise_deterministic(self):
        cfg = PopulationConfig(layers=2, latent_dims=6, neurons=8, subjects=2,
                               stimuli=60, teacher_seed=3, trials=5)
        a = generate_population(cfg)
        b = generate_population(cfg)
        for pa, pb in zip(a.profiles, b.profiles):
            assert pa.key == pb.key
            assert np.array_equal(pa.matrix.values, pb.matrix.values)

    def test_profile_layout(self, small_population):
        ds = small_population
        assert len(ds.profiles) == 2 * 2 * 2  # subjects x layers x stages
        assert ds.stages() == ["post_nl", "pre_nl"]
        assert ds.metadata["c"] == 100.0
        post = ds.get("subject00", "layer1", "post_nl")
        assert np.all(post.matrix.values > 0)
        assert post.hierarchy_level == 1.0

    def test_zippering_ordering(self, small_population):
        ds = small_population
        a_pre = ds.get("subject00", "layer2", "pre_nl")
        b_pre = ds.get("subject01", "layer2", "pre_nl")
        a_post = ds.get("subject00", "layer2", "post_nl")
        b_post = ds.get("subject01", "layer2", "post_nl")
        ridge_pre = predictivity(a_pre, b_pre, RidgeMethod(seed=0), SPLIT)
        ridge_post = predictivity(a_post, b_post, RidgeMethod(seed=0), SPLIT)
        zip_post = predictivity(a_post, b_post, ExactZipperingMethod(c=100.0), SPLIT)
        assert ridge_pre >= 0.98
        assert ridge_post < ridge_pre - 0.05
        assert zip_post > ridge_post + 0.05
        assert zip_post >= 0.9

    def test_approx_zippering_sits_between(self, small_population):
        ds = small_population
        a = ds.get("subject00", "layer2", "post_nl")
        b = ds.get("subject01", "layer2", "post_nl")
        ridge = predictivity(a, b, RidgeMethod(seed=0), SPLIT)
        approx = predictivity(a, b, ApproxZipperingMethod(), SPLIT)
        exact = predictivity(a, b, ExactZipperingMethod(c=100.0), SPLIT)
        assert ridge < approx < exact

    def test_cross_layer_scores_below_same_layer(self, small_population):
        ds = small_population
        a1 = ds.get("subject00", "layer1", "post_nl")
        b1 = ds.get("subject01", "layer1", "post_nl")
        b2 = ds.get("subject01", "layer2", "post_nl")
        m = RidgeMethod(seed=0)
        assert predictivity(a1, b2, m, SPLIT) < predictivity(a1, b1, m, SPLIT)

    def test_condition_number_regeneration_error(self):
        cfg = PopulationConfig(layers=1, latent_dims=30, neurons=30, subjects=1,
                               stimuli=50, teacher_seed=0, trials=2, kappa_max=1.01)
        with pytest.raises(SimulationError, match="condition number"):
            generate_population(cfg)

    def test_attach_trials(self):
        cfg = PopulationConfig(layers=1, latent_dims=4, neurons=6, subjects=1,
                               stimuli=40, teacher_seed=5, trials=7, attach_trials=True)
        ds = generate_population(cfg)
        post = ds.select(stage="post_nl")[0]
        assert post.trials is not None
        assert post.trials.trial_count == 7
        assert post.matrix.values == pytest.approx(post.trials.values.mean(axis=2))


class TestSpuriousVariant:
    def test_zero_extra_is_identity(self, small_population):
        p = small_population.get("subject00", "layer1", "post_nl")
        v = spurious_model_variant(p, 0)
        assert np.array_equal(v.matrix.values, p.matrix.values)
        assert v.matrix.neuron_ids == p.matrix.neuron_ids

    def test_forward_score_stable_reverse_drops(self, small_population):
        # ground-truth-style model: the target's own responses, plus noise
        # columns in the variant. Regression ignores extra source noise; the
        # reverse direction has to predict it and the median collapses.
        ds = small_population
        b = ds.get("subject01", "layer1", "post_nl")
        model = spurious_model_variant(b, 0)  # clean copy
        variant = spurious_model_variant(b, 45, seed=11)  # 45 noise on 30 real
        m = RidgeMethod(seed=0)
        fwd_base = predictivity(model, b, m, SPLIT)
        fwd_variant = predictivity(variant, b, m, SPLIT)
        assert fwd_base >= 0.99
        assert abs(fwd_variant - fwd_base) < 0.02
        rev_base = predictivity(b, model, m, SPLIT)
        rev_variant = predictivity(b, variant, m, SPLIT)
        assert rev_variant <= rev_base - 0.1
