"""Classification, ranking, and diversity metrics for link recommenders.

Metrics can target either the observed edge set (the naive view) or,
when ground truth is available, the counterfactual positives drawn from
the true link probabilities.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    auc: float
    diagnostics: tuple = ()


def classification_metrics(labels, scores, threshold=0.5):
    """Precision/recall/F1 at the threshold plus rank-based AUC.

    Ties in AUC contribute 1/2. Metrics that are undefined (no positive
    labels, no predicted positives, or a single class) come back as None
    with a note in ``diagnostics``.
    """
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    predicted = scores >= threshold
    notes = []

    tp = float(np.sum(predicted & labels))
    n_pred = float(predicted.sum())
    n_pos = float(labels.sum())
    n_neg = float(labels.size - n_pos)

    precision = tp / n_pred if n_pred else None
    if precision is None:
        notes.append("no predicted positives: precision undefined")
    recall = tp / n_pos if n_pos else None
    if recall is None:
        notes.append("no positive labels: recall undefined")
    if precision and recall and (precision + recall) > 0:
        f1 = 2 * precision * recall / (precision + recall)
    elif precision is None or recall is None:
        f1 = None
    else:
        f1 = 0.0

    if n_pos and n_neg:
        ranks = rankdata(scores)  # average ranks resolve ties as 1/2
        auc = (ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
        auc = float(auc)
    else:
        auc = None
        notes.append("single-class labels: AUC undefined")
    return ClassificationMetrics(
        precision=precision, recall=recall, f1=f1, auc=auc,
        diagnostics=tuple(notes),
    )


def average_precision(ranked, positives):
    """Mean over positives of precision at each positive's rank."""
    positives = set(positives)
    if not positives:
        return None
    hits = 0
    precisions = []
    for rank, candidate in enumerate(ranked, start=1):
        if candidate in positives:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        return 0.0
    return float(np.mean(precisions))


@dataclass(frozen=True)
class RankingMetrics:
    map: float
    recall_at_k: float
    mean_rank: float
    k: int
    sources_scored: int
    sources_skipped: int


def ranking_metrics(ranked_by_source, positives_by_source, k=100):
    """Per-source ranking quality averaged over sources.

    ``ranked_by_source`` maps a source node to its ranked candidate list
    and ``positives_by_source`` to the relevant targets. Sources with no
    positives are excluded from the averages and counted as skipped.
    """
    aps, recalls, mean_ranks = [], [], []
    skipped = 0
    for source, ranked in ranked_by_source.items():
        positives = set(positives_by_source.get(source, ()))
        if not positives:
            skipped += 1
            continue
        aps.append(average_precision(ranked, positives))
        top_k = set(ranked[:k])
        recalls.append(len(top_k & positives) / len(positives))
        rank_of = {c: r for r, c in enumerate(ranked, start=1)}
        found = [rank_of[p] for p in positives if p in rank_of]
        mean_ranks.append(float(np.mean(found)) if found else float(len(ranked)))
    if not aps:
        raise ValueError("no source has positive links")
    return RankingMetrics(
        map=float(np.mean(aps)),
        recall_at_k=float(np.mean(recalls)),
        mean_rank=float(np.mean(mean_ranks)),
        k=k,
        sources_scored=len(aps),
        sources_skipped=skipped,
    )


def category_entropy(categories):
    """Shannon entropy (natural log) of a category multiset; empty -> 0."""
    categories = np.asarray(list(categories))
    if categories.size == 0:
        return 0.0
    _, counts = np.unique(categories, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def entropy_at_k(ranked_by_source, positives_by_source, categories, k=100):
    """Mean category entropy of the true positives in each source's top k."""
    values = []
    for source, ranked in ranked_by_source.items():
        positives = set(positives_by_source.get(source, ()))
        hits = [c for c in ranked[:k] if c in positives]
        values.append(category_entropy([categories[h] for h in hits]))
    return float(np.mean(values)) if values else 0.0


def rank_candidates(score_matrix, exclude_edges=None):
    """Ranked candidate lists per source from an (n, n) score matrix.

    The source itself is excluded; ``exclude_edges`` optionally removes
    already-linked targets. Ties break on candidate id so rankings are
    deterministic.
    """
    n = score_matrix.shape[0]
    excluded = {i: {i} for i in range(n)}
    if exclude_edges is not None:
        for i, j in exclude_edges:
            excluded[int(i)].add(int(j))
    ranked = {}
    for i in range(n):
        candidates = np.array(
            [j for j in range(n) if j not in excluded[i]], dtype=np.int64
        )
        scores = score_matrix[i, candidates]
        order = np.lexsort((candidates, -scores))
        ranked[i] = candidates[order].tolist()
    return ranked


@dataclass(frozen=True)
class MetricReport:
    """Bundle of all §-level metrics for one model/data pair."""

    target: str
    k: int
    classification: ClassificationMetrics
    ranking: RankingMetrics
    entropy_at_k: float
    extras: dict = field(default_factory=dict)

    def to_json_dict(self):
        def opt(x):
            return None if x is None else float(x)

        return {
            "target": self.target,
            "k": self.k,
            "precision": opt(self.classification.precision),
            "recall": opt(self.classification.recall),
            "f1": opt(self.classification.f1),
            "auc": opt(self.classification.auc),
            "map": opt(self.ranking.map),
            "recall_at_k": opt(self.ranking.recall_at_k),
            "mean_rank": opt(self.ranking.mean_rank),
            "entropy_at_k": opt(self.entropy_at_k),
            "sources_scored": self.ranking.sources_scored,
            "sources_skipped": self.ranking.sources_skipped,
            "diagnostics": list(self.classification.diagnostics),
        }

    CSV_FIELDS = (
        "target", "k", "precision", "recall", "f1", "auc", "map",
        "recall_at_k", "mean_rank", "entropy_at_k",
    )

    def to_csv_row(self):
        payload = self.to_json_dict()
        return ",".join(
            "" if payload[f] is None else repr(payload[f])
            if isinstance(payload[f], float) else str(payload[f])
            for f in self.CSV_FIELDS
        )


def evaluate_scores(score_matrix, positive_pairs, categories, target,
                    threshold=0.5, k=100, exclude_edges=None):
    """Compute the full MetricReport for a score matrix.

    ``positive_pairs`` is an (m, 2) array of ground-truth links for the
    chosen target ('observed' or 'true').
    """
    n = score_matrix.shape[0]
    positives_by_source = {i: set() for i in range(n)}
    for i, j in np.asarray(positive_pairs).reshape(-1, 2):
        positives_by_source[int(i)].add(int(j))
    ranked = rank_candidates(score_matrix, exclude_edges=exclude_edges)

    labels, scores = [], []
    for i in range(n):
        for j in ranked[i]:
            labels.append(1.0 if j in positives_by_source[i] else 0.0)
            scores.append(score_matrix[i, j])
    return MetricReport(
        target=target,
        k=k,
        classification=classification_metrics(labels, scores, threshold),
        ranking=ranking_metrics(ranked, positives_by_source, k=k),
        entropy_at_k=entropy_at_k(ranked, positives_by_source, categories, k=k),
    )
