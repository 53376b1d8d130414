import numpy as np
import pytest

from linkdebias.estimators import (
    ESTIMATORS,
    GroundTruth,
    LossSpec,
    PairEstimates,
    per_pair_term_values,
    per_pair_variance_terms,
    true_risk,
)
from linkdebias.synthesis import (
    GroundTruthWorld,
    SyntheticSpec,
    exact_pair_moments,
    generate_world,
    load_world,
    monte_carlo_risk_distribution,
    sample_observed,
    save_world,
)

ZERO_ONE = LossSpec("zero-one", delta=1.0)


def two_block_world(n_per_block, pi_same=0.9, pi_cross=0.6, y_const=0.8):
    """Two categories, constant link probability, block propensities."""
    n = 2 * n_per_block
    rng = np.random.default_rng(99)
    b = float(np.log(y_const / (1.0 - y_const)))
    return GroundTruthWorld(
        features=rng.standard_normal((n, 4)),
        categories=np.repeat([0, 1], n_per_block),
        pi_table=np.array([[pi_same, pi_cross], [pi_cross, pi_same]]),
        link_w=np.zeros(4),
        link_b=b,
    )


class TestGenerateWorld:
    def test_propensity_ranges(self):
        world = generate_world(SyntheticSpec(n=20, n_categories=2, seed=1))
        diag = np.diag(world.pi_table)
        off = world.pi_table[~np.eye(2, dtype=bool)]
        assert np.all((diag >= 0.7) & (diag <= 1.0))
        assert np.all((off >= 0.1) & (off <= 0.3))

    def test_seed_determinism(self):
        spec = SyntheticSpec(n=30, n_categories=3, d=8, seed=7)
        w1, w2 = generate_world(spec), generate_world(spec)
        assert np.array_equal(w1.features, w2.features)
        assert np.array_equal(w1.pi_table, w2.pi_table)
        assert np.array_equal(w1.link_w, w2.link_w)
        assert w1.link_b == w2.link_b

    def test_zero_weights_give_half(self):
        spec = SyntheticSpec(n=10, d=4, true_w=np.zeros(4), true_b=0.0, seed=0)
        world = generate_world(spec)
        src_dst_free = world.y_matrix()
        np.testing.assert_allclose(src_dst_free, 0.5)

    def test_mean_y_calibrated(self):
        world = generate_world(SyntheticSpec(n=120, d=8, seed=3, target_mean_y=0.2))
        truth = world.universe_truth()
        assert abs(truth.y.mean() - 0.2) < 0.01

    def test_invalid_range_rejected(self):
        with pytest.raises(ValueError, match="diag_range"):
            SyntheticSpec(diag_range=(0.9, 0.2))


class TestSampleObserved:
    def test_zero_propensity_empty(self):
        world = two_block_world(5)
        world = GroundTruthWorld(
            features=world.features,
            categories=world.categories,
            pi_table=np.zeros((2, 2)),
            link_w=world.link_w,
            link_b=world.link_b,
        )
        g = sample_observed(world, 0)
        assert g.n_edges == 0

    def test_certain_world_complete(self):
        rng = np.random.default_rng(1)
        world = GroundTruthWorld(
            features=rng.standard_normal((6, 2)),
            categories=np.zeros(6, dtype=int),
            pi_table=np.ones((1, 1)),
            link_w=np.zeros(2),
            link_b=40.0,  # sigmoid saturates to 1
        )
        g = sample_observed(world, 0)
        assert g.n_edges == 6 * 5

    def test_two_block_observed_rates(self):
        # Same-field exposure 0.9, cross-field 0.6, relevance 0.8: the
        # observed link rates concentrate near 0.72 and 0.48.
        world = two_block_world(500)
        g = sample_observed(world, 12345)
        cats = world.categories
        same = cats[g.edges[:, 0]] == cats[g.edges[:, 1]]
        n_same_pairs = 2 * 500 * 499
        n_cross_pairs = 2 * 500 * 500
        rate_same = same.sum() / n_same_pairs
        rate_cross = (~same).sum() / n_cross_pairs
        se_same = np.sqrt(0.72 * 0.28 / n_same_pairs)
        se_cross = np.sqrt(0.48 * 0.52 / n_cross_pairs)
        assert abs(rate_same - 0.72) < 3 * se_same
        assert abs(rate_cross - 0.48) < 3 * se_cross

    def test_marginal_rate_matches_product(self):
        world = generate_world(SyntheticSpec(n=40, seed=5, target_mean_y=0.3))
        truth = world.universe_truth()
        q = truth.y * truth.pi
        trials = 400
        counts = np.zeros_like(q)
        for t in range(trials):
            g = sample_observed(world, 1000 + t)
            from linkdebias.graph import observed_vector

            counts += observed_vector(g)
        rate = counts / trials
        se = np.sqrt(q * (1 - q) / trials)
        assert np.all(np.abs(rate - q) < 5 * np.maximum(se, 1e-3))

    def test_determinism(self):
        world = two_block_world(10)
        g1 = sample_observed(world, 7)
        g2 = sample_observed(world, 7)
        assert np.array_equal(g1.edges, g2.edges)


class TestExactPairMoments:
    def test_degenerate_relevance(self):
        mean, var = exact_pair_moments(0.0, 0.7, lambda o: 3.0 * o + 1.0)
        assert mean == pytest.approx(1.0)
        assert var == pytest.approx(0.0)

    def test_identity_term_moments(self):
        mean, var = exact_pair_moments(0.8, 0.6, lambda o: float(o))
        assert mean == pytest.approx(0.48)
        assert var == pytest.approx(0.2496)

    def test_matches_closed_form_variances(self):
        rng = np.random.default_rng(77)
        size = 1000
        truth = GroundTruth(
            y=rng.uniform(0.02, 0.98, size), pi=rng.uniform(0.02, 0.98, size)
        )
        est = PairEstimates(
            y_hat=rng.uniform(0.02, 0.98, size),
            pi_hat=rng.uniform(0.02, 0.98, size),
        )
        for which in ESTIMATORS:
            t1, t0 = per_pair_term_values(which, est, ZERO_ONE)
            _, var = exact_pair_moments(
                truth.y, truth.pi, lambda o: o * t1 + (1 - o) * t0
            )
            np.testing.assert_allclose(
                var,
                per_pair_variance_terms(which, truth, est),
                atol=1e-12,
            )


class TestMonteCarloRiskDistribution:
    def test_no_exposure_bias_naive_unbiased(self):
        world = two_block_world(4, pi_same=1.0, pi_cross=1.0)
        est = world.matched_estimates()
        mean, std, samples = monte_carlo_risk_distribution(
            world, est, "naive", trials=2000, seed=0, loss=ZERO_ONE
        )
        target = true_risk(world.universe_truth(), est, ZERO_ONE).value
        se = std / np.sqrt(len(samples))
        assert abs(mean - target) < 4 * se

    def test_weighted_unbiased_under_bias(self):
        world = two_block_world(4)
        est = world.matched_estimates()
        mean, std, samples = monte_carlo_risk_distribution(
            world, est, "w", trials=4000, seed=1, loss=ZERO_ONE
        )
        target = true_risk(world.universe_truth(), est, ZERO_ONE).value
        se = std / np.sqrt(len(samples))
        assert abs(mean - target) < 4 * se

    def test_sample_variance_matches_closed_form(self):
        world = two_block_world(3)
        est = world.matched_estimates()
        truth = world.universe_truth()
        from linkdebias.estimators import variance_closed_form

        _, std, _ = monte_carlo_risk_distribution(
            world, est, "pu", trials=100000, seed=2, loss=ZERO_ONE
        )
        closed = variance_closed_form("pu", truth, est)
        assert abs(std**2 - closed) / closed < 0.10

    def test_minimum_trials(self):
        world = two_block_world(3)
        with pytest.raises(ValueError, match="100"):
            monte_carlo_risk_distribution(
                world, world.matched_estimates(), "naive", 10, 0, ZERO_ONE
            )


class TestWorldSerialization:
    def test_round_trip(self, tmp_path):
        world = generate_world(SyntheticSpec(n=15, n_categories=3, d=6, seed=9))
        save_world(world, tmp_path)
        loaded = load_world(tmp_path)
        assert np.array_equal(world.features, loaded.features)
        assert np.array_equal(world.categories, loaded.categories)
        assert np.array_equal(world.pi_table, loaded.pi_table)
        assert np.array_equal(world.link_w, loaded.link_w)
        assert world.link_b == loaded.link_b
