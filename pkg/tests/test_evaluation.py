import numpy as np
import pytest

from linkdebias.evaluation import (
    average_precision,
    category_entropy,
    classification_metrics,
    entropy_at_k,
    rank_candidates,
    ranking_metrics,
)


class TestClassificationMetrics:
    def test_perfect_scores(self):
        m = classification_metrics([1, 0, 1, 0], [1.0, 0.0, 1.0, 0.0])
        assert m.precision == 1.0
        assert m.recall == 1.0
        assert m.auc == 1.0

    def test_constant_scores_auc_half(self):
        m = classification_metrics([1, 0, 1, 0], [0.7, 0.7, 0.7, 0.7])
        assert m.auc == pytest.approx(0.5)

    def test_enumerated_auc(self):
        # positive-negative pairs: (0.9, 0.8) ok, (0.9, 0.1) ok,
        # (0.7, 0.8) wrong, (0.7, 0.1) ok -> 3/4
        m = classification_metrics([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])
        assert m.auc == pytest.approx(0.75)

    def test_no_positives_reports_none(self):
        m = classification_metrics([0, 0], [0.2, 0.9])
        assert m.recall is None
        assert any("recall" in note for note in m.diagnostics)

    def test_auc_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 2, 50)
        labels[0], labels[1] = 0, 1
        scores = rng.random(50)
        a = classification_metrics(labels, scores).auc
        b = classification_metrics(labels, np.exp(3 * scores) + 5).auc
        assert a == pytest.approx(b)

    def test_f1_consistent(self):
        m = classification_metrics([1, 1, 0, 0], [0.9, 0.2, 0.8, 0.1])
        p, r = m.precision, m.recall
        assert m.f1 == pytest.approx(2 * p * r / (p + r))


class TestRankingMetrics:
    def test_single_positive_on_top(self):
        ranked = {0: list(range(10))}
        positives = {0: {0}}
        m = ranking_metrics(ranked, positives, k=5)
        assert m.map == 1.0
        assert m.recall_at_k == 1.0
        assert m.mean_rank == 1.0

    def test_two_positives_ranks_one_and_three(self):
        assert average_precision([5, 6, 7, 8], {5, 7}) == pytest.approx(5 / 6)

    def test_positive_ranked_last(self):
        ranked = {0: [3, 2, 1, 9]}
        m = ranking_metrics(ranked, {0: {9}}, k=2)
        assert m.mean_rank == 4.0
        assert m.recall_at_k == 0.0

    def test_sources_without_positives_skipped(self):
        ranked = {0: [1, 2], 1: [0, 2]}
        m = ranking_metrics(ranked, {0: {2}, 1: set()}, k=2)
        assert m.sources_scored == 1
        assert m.sources_skipped == 1

    def test_recall_nondecreasing_in_k(self):
        rng = np.random.default_rng(1)
        ranked = {i: rng.permutation(30).tolist() for i in range(8)}
        positives = {i: set(rng.integers(0, 30, 4).tolist()) for i in range(8)}
        values = [
            ranking_metrics(ranked, positives, k=k).recall_at_k
            for k in (1, 3, 10, 30)
        ]
        assert values == sorted(values)

    def test_all_empty_rejected(self):
        with pytest.raises(ValueError, match="no source"):
            ranking_metrics({0: [1]}, {0: set()})

    def test_permutation_invariance_over_sources(self):
        rng = np.random.default_rng(2)
        ranked = {i: rng.permutation(20).tolist() for i in range(6)}
        positives = {i: set(rng.integers(0, 20, 3).tolist()) for i in range(6)}
        m1 = ranking_metrics(ranked, positives)
        order = list(reversed(list(ranked)))
        m2 = ranking_metrics(
            {i: ranked[i] for i in order}, positives
        )
        assert m1 == m2


class TestEntropy:
    def test_single_category_zero(self):
        assert category_entropy([2, 2, 2, 2]) == 0.0

    def test_uniform_two_categories(self):
        assert category_entropy([0, 1, 0, 1]) == pytest.approx(np.log(2))

    def test_weighted_three_categories(self):
        # distribution [0.5, 0.25, 0.25] -> 1.5 ln 2
        assert category_entropy([0, 0, 1, 2]) == pytest.approx(1.5 * np.log(2))

    def test_empty_contributes_zero(self):
        assert category_entropy([]) == 0.0

    def test_bounded_by_log_c(self):
        rng = np.random.default_rng(3)
        cats = rng.integers(0, 7, 100)
        assert category_entropy(cats) <= np.log(7) + 1e-12

    def test_entropy_at_k_averages_over_sources(self):
        ranked = {0: [1, 2, 3], 1: [0, 2, 3]}
        positives = {0: {1, 2}, 1: set()}
        categories = {0: 0, 1: 0, 2: 1, 3: 1}
        value = entropy_at_k(ranked, positives, categories, k=3)
        assert value == pytest.approx(np.log(2) / 2)


class TestRankCandidates:
    def test_excludes_self_and_orders_by_score(self):
        scores = np.array(
            [[0.0, 0.9, 0.8], [0.2, 0.0, 0.7], [0.5, 0.5, 0.0]]
        )
        ranked = rank_candidates(scores)
        assert ranked[0] == [1, 2]
        assert ranked[1] == [2, 0]
        assert ranked[2] == [0, 1]  # tie broken by id

    def test_exclude_edges(self):
        scores = np.full((3, 3), 0.5)
        ranked = rank_candidates(scores, exclude_edges=[(0, 1)])
        assert ranked[0] == [2]
