import math

import numpy as np
import pytest
import scipy.stats

from crmlab import (
    MixedLogitSpec,
    SoftmaxPolicy,
    action_prob_matrix,
    action_probs,
    argmax_action,
    gumbel_noise,
    load_model,
    mixed_logit_prob_bounds,
    mixed_logit_prob_mc,
    param_distance_sq,
    sample_action,
    save_model,
    temper,
    zero_policy,
)


def bias_policy(biases, d=1):
    """Policy whose logits equal ``biases`` for every context."""
    b = np.asarray(biases, dtype=float)
    return SoftmaxPolicy(np.zeros((b.shape[0], d)), b)


class TestActionProbs:
    def test_uniform(self):
        p = action_probs(zero_policy(3, 5), np.zeros(3))
        np.testing.assert_allclose(p, np.full(5, 0.2), rtol=0, atol=0)

    def test_two_action_logit_gap_one(self):
        p = action_probs(bias_policy([1.0, 0.0]), np.zeros(1))
        assert abs(p[0] - 0.73106) < 1e-5
        assert abs(p[1] - 0.26894) < 1e-5

    def test_extreme_logits_no_overflow(self):
        p = action_probs(bias_policy([1000.0, 0.0]), np.zeros(1))
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0)
        assert p[1] == pytest.approx(0.0, abs=1e-300)

    def test_simplex_and_positivity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            k, d = int(rng.integers(2, 6)), int(rng.integers(1, 5))
            pol = SoftmaxPolicy(rng.normal(size=(k, d)), rng.normal(size=k))
            x = rng.normal(size=d)
            p = action_probs(pol, x)
            assert abs(p.sum() - 1.0) <= 1e-9
            assert np.all(p > 0.0)

    def test_rejects_nonfinite_context(self):
        with pytest.raises(ValueError):
            action_probs(zero_policy(2, 3), np.array([1.0, np.nan]))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            action_probs(zero_policy(2, 3), np.zeros(4))

    def test_matrix_matches_per_row(self):
        rng = np.random.default_rng(2)
        pol = SoftmaxPolicy(rng.normal(size=(4, 3)), rng.normal(size=4))
        X = rng.normal(size=(6, 3))
        P = action_prob_matrix(pol, X)
        # matmul and matvec reduce in different orders; agreement is to a
        # few ulps, not bit-exact.
        for i in range(6):
            np.testing.assert_allclose(P[i], action_probs(pol, X[i]), rtol=1e-13)


class TestSampling:
    def test_single_action_policy(self):
        rng = np.random.default_rng(0)
        pol = zero_policy(2, 1)
        assert all(sample_action(pol, np.zeros(2), rng) == 0 for _ in range(20))

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(42)
        pol = zero_policy(1, 4)
        x = np.zeros(1)
        counts = np.zeros(4)
        for _ in range(100_000):
            counts[sample_action(pol, x, rng)] += 1
        np.testing.assert_allclose(counts / 100_000, 0.25, atol=0.006)

    def test_matches_softmax_frequency(self):
        rng = np.random.default_rng(43)
        pol = bias_policy([1.0, 0.0])
        x = np.zeros(1)
        hits = sum(sample_action(pol, x, rng) == 0 for _ in range(100_000))
        assert abs(hits / 100_000 - 0.731) < 0.006

    def test_goodness_of_fit(self):
        """Gumbel-argmax draws follow the softmax distribution.

        Uses the same perturb-and-argmax rule as sample_action, batched so
        that 10 policies x 100,000 draws stay fast.
        """
        rng = np.random.default_rng(7)
        for _ in range(10):
            k, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            pol = SoftmaxPolicy(rng.normal(size=(k, d)), rng.normal(size=k))
            x = rng.normal(size=d)
            logits = pol.logits(x)
            draws = np.argmax(logits + gumbel_noise(rng, (100_000, k)), axis=1)
            counts = np.bincount(draws, minlength=k)
            expected = 100_000 * action_probs(pol, x)
            result = scipy.stats.chisquare(counts, expected)
            assert result.pvalue > 0.001


class TestArgmax:
    def test_unique_max(self):
        assert argmax_action(bias_policy([0.0, 0.0, 1.0]), np.zeros(1)) == 2

    def test_tie_breaks_to_lowest_index(self):
        assert argmax_action(zero_policy(1, 3), np.zeros(1)) == 0

    def test_negative_logits(self):
        assert argmax_action(bias_policy([-5.0, -1.0]), np.zeros(1)) == 1

    def test_invariant_under_positive_tempering(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            pol = SoftmaxPolicy(rng.normal(size=(4, 3)), rng.normal(size=4))
            x = rng.normal(size=3)
            base = argmax_action(pol, x)
            for kappa in (0.3, 1.0, 2.5, 17.0):
                assert argmax_action(temper(pol, kappa), x) == base


class TestMixedLogitSpec:
    def test_rejects_variance_above_prior(self):
        pol = zero_policy(2, 3)
        with pytest.raises(ValueError):
            MixedLogitSpec(pol, 2.0, pol, 1.0)

    def test_rejects_negative_variance(self):
        pol = zero_policy(2, 3)
        with pytest.raises(ValueError):
            MixedLogitSpec(pol, -0.1, pol, 1.0)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            MixedLogitSpec(zero_policy(2, 3), 0.5, zero_policy(3, 3), 1.0)

    def test_zero_variance_allowed(self):
        pol = zero_policy(2, 3)
        spec = MixedLogitSpec(pol, 0.0, pol, 1.0)
        assert spec.variance == 0.0


class TestMixedLogitMC:
    def test_tiny_variance_recovers_softmax(self):
        rng = np.random.default_rng(11)
        pol = SoftmaxPolicy(rng.normal(size=(3, 2)), rng.normal(size=3))
        spec = MixedLogitSpec(pol, 1e-12, pol, 1.0)
        x = rng.normal(size=2)
        est, _ = mixed_logit_prob_mc(spec, x, 1, 2000, np.random.default_rng(0))
        assert abs(est - action_probs(pol, x)[1]) < 1e-6

    def test_estimate_in_unit_interval(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            pol = SoftmaxPolicy(rng.normal(size=(3, 2)), np.zeros(3))
            spec = MixedLogitSpec(pol, float(rng.uniform(0, 1)), pol, 1.0)
            est, se = mixed_logit_prob_mc(
                spec, rng.normal(size=2), 0, 500, np.random.default_rng(1)
            )
            assert 0.0 <= est <= 1.0
            assert se >= 0.0

    def test_symmetric_gaussian_logit_is_half(self):
        # k=2, d=1, zero mean weights, sigma=1, x=1: the logit difference is
        # symmetric around zero, so the probability of either action is 1/2.
        pol = zero_policy(1, 2)
        spec = MixedLogitSpec(pol, 1.0, pol, 1.0)
        est, se = mixed_logit_prob_mc(
            spec, np.ones(1), 0, 20_000, np.random.default_rng(9)
        )
        assert abs(est - 0.5) <= 3.0 * se

    def test_single_sample_has_nan_stderr(self):
        pol = zero_policy(1, 2)
        spec = MixedLogitSpec(pol, 0.5, pol, 1.0)
        est, se = mixed_logit_prob_mc(spec, np.ones(1), 0, 1, np.random.default_rng(2))
        assert 0.0 <= est <= 1.0
        assert math.isnan(se)

    def test_rejects_bad_sample_count(self):
        pol = zero_policy(1, 2)
        spec = MixedLogitSpec(pol, 0.5, pol, 1.0)
        with pytest.raises(ValueError):
            mixed_logit_prob_mc(spec, np.ones(1), 0, 0, np.random.default_rng(2))


class TestSandwichBounds:
    def test_zero_variance_collapse(self):
        rng = np.random.default_rng(21)
        pol = SoftmaxPolicy(rng.normal(size=(3, 2)), rng.normal(size=3))
        spec = MixedLogitSpec(pol, 0.0, pol, 1.0)
        x = rng.normal(size=2)
        x = x / np.linalg.norm(x)
        lo, hi = mixed_logit_prob_bounds(spec, x, 2, 1.0)
        p = action_probs(pol, x)[2]
        assert lo == p
        assert hi == p

    def test_half_prob_small_variance(self):
        pol = zero_policy(1, 2)
        spec = MixedLogitSpec(pol, 0.02, pol, 1.0)
        lo, hi = mixed_logit_prob_bounds(spec, np.ones(1), 0, 1.0)
        assert lo == pytest.approx(0.5 * math.exp(-0.01), rel=1e-12)
        assert hi == pytest.approx(0.5 * math.exp(0.04), rel=1e-12)
        assert abs(lo - 0.49502) < 1e-5
        assert abs(hi - 0.52041) < 1e-5

    def test_upper_clamped_to_one(self):
        # softmax prob 0.9 with sigma=1, B=2: the raw upper factor e^8
        # exceeds 1/0.9, so the bound must clamp.
        pol = bias_policy([math.log(9.0), 0.0])
        spec = MixedLogitSpec(pol, 1.0, pol, 1.0)
        lo, hi = mixed_logit_prob_bounds(spec, np.ones(1), 0, 2.0)
        assert hi == 1.0
        assert 0.0 < lo < 0.9

    def test_rejects_context_norm_above_bound(self):
        pol = zero_policy(2, 2)
        spec = MixedLogitSpec(pol, 0.1, pol, 1.0)
        with pytest.raises(ValueError):
            mixed_logit_prob_bounds(spec, np.array([3.0, 4.0]), 0, 1.0)

    def test_monotone_tightening_in_variance(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            pol = SoftmaxPolicy(rng.normal(size=(3, 2)), rng.normal(size=3))
            x = rng.normal(size=2)
            B = float(np.linalg.norm(x)) + 0.5
            sig = np.sort(rng.uniform(0.001, 0.5, size=4))
            prior = float(sig[-1])
            los, his = [], []
            for s in sig:
                spec = MixedLogitSpec(pol, float(s), pol, prior)
                lo, hi = mixed_logit_prob_bounds(spec, x, 1, B)
                los.append(lo)
                his.append(hi)
            assert all(a >= b for a, b in zip(los, los[1:]))
            assert all(a <= b for a, b in zip(his, his[1:]))

    def test_mc_estimate_inside_sandwich(self):
        # Light version of the containment property; the acceptance suite
        # runs the full 1,000-case sweep at 200,000 draws.
        rng = np.random.default_rng(23)
        for _ in range(50):
            k, d = int(rng.integers(2, 5)), int(rng.integers(1, 4))
            pol = SoftmaxPolicy(0.5 * rng.normal(size=(k, d)), np.zeros(k))
            sigma = float(rng.uniform(0.001, 0.1))
            x = rng.normal(size=d)
            B = float(np.linalg.norm(x)) * 1.1 + 1e-9
            a = int(rng.integers(k))
            spec = MixedLogitSpec(pol, sigma, pol, 1.0)
            lo, hi = mixed_logit_prob_bounds(spec, x, a, B)
            est, se = mixed_logit_prob_mc(spec, x, a, 4000, rng)
            assert lo - 4 * se <= est <= hi + 4 * se


class TestParamDistance:
    def test_identical_policies(self):
        pol = SoftmaxPolicy(np.ones((2, 2)), np.zeros(2))
        assert param_distance_sq(pol, pol) == 0.0

    def test_biases_excluded(self):
        a = SoftmaxPolicy(np.ones((2, 2)), np.array([5.0, -3.0]))
        b = SoftmaxPolicy(np.zeros((2, 2)), np.array([-100.0, 40.0]))
        assert param_distance_sq(a, b) == 4.0

    def test_hand_value(self):
        a = SoftmaxPolicy(np.array([[2.0, 0.0]]), np.zeros(1))
        b = SoftmaxPolicy(np.array([[0.0, 1.0]]), np.zeros(1))
        assert param_distance_sq(a, b) == 5.0

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            param_distance_sq(zero_policy(2, 2), zero_policy(3, 2))


class TestPolicyValueSemantics:
    def test_arrays_are_frozen_copies(self):
        w = np.ones((2, 2))
        pol = SoftmaxPolicy(w, np.zeros(2))
        w[0, 0] = 99.0
        assert pol.weights[0, 0] == 1.0
        with pytest.raises(ValueError):
            pol.weights[0, 0] = 5.0

    def test_rejects_nonfinite_weights(self):
        with pytest.raises(ValueError):
            SoftmaxPolicy(np.array([[np.inf]]), np.zeros(1))


class TestModelFile:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(31)
        pol = SoftmaxPolicy(rng.normal(size=(3, 4)), rng.normal(size=3))
        prior = SoftmaxPolicy(rng.normal(size=(3, 4)), rng.normal(size=3))
        path = tmp_path / "model.json"
        save_model(
            path, pol, sigma=0.25, sigma0=1.0, prior=prior, feature_norm_bound=1.75
        )
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.policy.weights, pol.weights)
        np.testing.assert_array_equal(loaded.policy.biases, pol.biases)
        np.testing.assert_array_equal(loaded.prior.weights, prior.weights)
        np.testing.assert_array_equal(loaded.prior.biases, prior.biases)
        assert loaded.sigma == 0.25
        assert loaded.sigma0 == 1.0
        assert loaded.feature_norm_bound == 1.75

    def test_optional_fields_absent(self, tmp_path):
        pol = zero_policy(2, 3)
        path = tmp_path / "bare.json"
        save_model(path, pol)
        loaded = load_model(path)
        assert loaded.sigma is None
        assert loaded.sigma0 is None
        assert loaded.prior is None

    def test_rejects_foreign_json(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"hello": 1}')
        with pytest.raises(ValueError):
            load_model(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("not json at all {")
        with pytest.raises(ValueError):
            load_model(path)
