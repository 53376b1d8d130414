"""Synthetic worlds with known ground truth, and the oracles used to
validate the closed-form estimator properties.

A world fixes per-node categories and features, a category-pair
propensity table, and a linear-sigmoid link-probability model. Observed
graphs are sampled from it by the two-coin process: a pair links iff it
is both relevant (probability y) and exposed (probability pi).
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .estimators import GroundTruth, PairEstimates, per_pair_term_values
from .graph import Graph, universe_indices


@dataclass(frozen=True)
class SyntheticSpec:
    """Configuration for generate_world.

    When ``true_w`` is omitted, a random direction is drawn and the bias
    term is calibrated so the mean link probability hits
    ``target_mean_y``. ``category_separation`` > 0 shifts each category's
    feature cloud along its own coordinate so category membership is
    linearly recoverable from pairwise feature products.
    """

    n: int = 200
    n_categories: int = 2
    d: int = 16
    diag_range: tuple = (0.7, 1.0)
    offdiag_range: tuple = (0.1, 0.3)
    true_w: np.ndarray = None
    true_b: float = None
    target_mean_y: float = 0.2
    category_separation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two nodes")
        for name in ("diag_range", "offdiag_range"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1")


@dataclass(frozen=True)
class GroundTruthWorld:
    """Node data plus the true propensity table and link model."""

    features: np.ndarray
    categories: np.ndarray
    pi_table: np.ndarray
    link_w: np.ndarray
    link_b: float
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def n_categories(self):
        return self.pi_table.shape[0]

    def y_matrix(self):
        """(n, n) true link probabilities; the diagonal is meaningless."""
        if "y" not in self._cache:
            scores = (self.features * self.link_w) @ self.features.T + self.link_b
            self._cache["y"] = 1.0 / (1.0 + np.exp(-scores))
        return self._cache["y"]

    def pi_matrix(self):
        """(n, n) true propensities from the category-pair table."""
        if "pi" not in self._cache:
            self._cache["pi"] = self.pi_table[
                np.ix_(self.categories, self.categories)
            ]
        return self._cache["pi"]

    def universe_truth(self):
        """GroundTruth vectors aligned with the pair universe order."""
        src, dst = universe_indices(self.n)
        return GroundTruth(
            y=self.y_matrix()[src, dst], pi=self.pi_matrix()[src, dst]
        )

    def matched_estimates(self, floor=1e-3):
        """PairEstimates with pi_hat = pi and y_hat = y (oracle predictor)."""
        truth = self.universe_truth()
        return PairEstimates(
            y_hat=truth.y, pi_hat=np.maximum(truth.pi, floor), floor=floor
        )


def _calibrate_bias(scores, target_mean):
    """Bisection for b so that mean sigmoid(scores + b) = target_mean."""
    lo, hi = -30.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.mean(1.0 / (1.0 + np.exp(-(scores + mid)))) < target_mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_world(spec):
    """Draw a ground-truth world from the spec, deterministically per seed."""
    rng = np.random.default_rng(spec.seed)
    C, n, d = spec.n_categories, spec.n, spec.d

    pi_table = rng.uniform(*spec.offdiag_range, size=(C, C))
    diag = rng.uniform(*spec.diag_range, size=C)
    np.fill_diagonal(pi_table, diag)

    categories = np.sort(np.arange(n) % C)  # balanced category sizes
    features = rng.standard_normal((n, d))
    if spec.category_separation > 0:
        if d <= C:
            raise ValueError("category_separation requires d > n_categories")
        # The first C coordinates become exact category indicators, so a
        # linear model over pairwise products can represent any
        # same-category offset per category.
        features[:, :C] = 0.0
        features[np.arange(n), categories] = spec.category_separation

    if spec.true_w is not None:
        w = np.asarray(spec.true_w, dtype=np.float64)
        if w.shape != (d,):
            raise ValueError("true_w dimension must match d")
    else:
        w = rng.standard_normal(d) / np.sqrt(d)
        if spec.category_separation > 0:
            # Keep the true link probabilities category-neutral: the
            # indicator coordinates carry exposure structure only.
            w[:C] = 0.0

    if spec.true_b is not None:
        b = float(spec.true_b)
    else:
        src, dst = universe_indices(n)
        scores = ((features * w) @ features.T)[src, dst]
        b = _calibrate_bias(scores, spec.target_mean_y)

    return GroundTruthWorld(
        features=features,
        categories=categories,
        pi_table=pi_table,
        link_w=w,
        link_b=b,
        seed=spec.seed,
    )


def sample_observed(world, rng):
    """Sample an observed graph: a pair links iff relevant and exposed."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    n = world.n
    relevant = rng.random((n, n)) < world.y_matrix()
    exposed = rng.random((n, n)) < world.pi_matrix()
    adjacency = relevant & exposed
    np.fill_diagonal(adjacency, False)
    edges = np.argwhere(adjacency)
    return Graph(
        features=world.features,
        categories=world.categories,
        edges=edges,
        n_categories=world.n_categories,
    )


def exact_pair_moments(y, pi, term):
    """Exact mean and variance of a per-pair term by enumerating outcomes.

    The four (o', a) outcomes have probabilities y*pi, y*(1-pi),
    (1-y)*pi, (1-y)*(1-pi), and the observed label is o = o' * a.
    ``term`` maps an observed label in {0, 1} to the term value (scalars
    or arrays, allowing many configurations to be enumerated at once).
    """
    y = np.asarray(y, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    outcomes = [
        (1, 1, y * pi),
        (1, 0, y * (1.0 - pi)),
        (0, 1, (1.0 - y) * pi),
        (0, 0, (1.0 - y) * (1.0 - pi)),
    ]
    mean = 0.0
    second = 0.0
    for o_prime, a, prob in outcomes:
        value = term(o_prime * a)
        mean = mean + prob * value
        second = second + prob * value**2
    return mean, second - mean**2


def monte_carlo_risk_distribution(world, est, which, trials, seed, loss):
    """Resample observations and recompute the chosen estimator.

    Returns (mean, std, samples) of the estimator's value across
    independently resampled observation sets. Estimator terms depend on
    the observations only through o, which is Bernoulli(y * pi) per
    pair, so observations are drawn directly at that marginal.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    truth = world.universe_truth()
    q = truth.y * truth.pi
    t1, t0 = per_pair_term_values(which, est, loss)
    rng = np.random.default_rng(seed)
    n_pairs = q.size
    samples = np.empty(trials)
    chunk = max(1, int(5e7) // max(n_pairs, 1))
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        obs = rng.random((stop - start, n_pairs)) < q
        samples[start:stop] = (obs @ (t1 - t0) + t0.sum()) / n_pairs
    return float(samples.mean()), float(samples.std(ddof=1)), samples


# ---------------------------------------------------------------------------
# World directory serialization
# ---------------------------------------------------------------------------


def save_world(world, out_dir):
    """Write nodes.jsonl, pi.csv, and truth.json into a directory."""
    os.makedirs(out_dir, exist_ok=True)
    nodes_path = os.path.join(out_dir, "nodes.jsonl")
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(world.n):
            rec = {
                "id": i,
                "category": int(world.categories[i]),
                "features": [float(x) for x in world.features[i]],
            }
            fh.write(json.dumps(rec) + "\n")
    pi_path = os.path.join(out_dir, "pi.csv")
    with open(pi_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in world.pi_table:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    truth_path = os.path.join(out_dir, "truth.json")
    payload = {
        "w": [float(x) for x in world.link_w],
        "b": float(world.link_b),
        "seed": int(world.seed),
    }
    with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [nodes_path, pi_path, truth_path]


def load_world(world_dir):
    """Inverse of save_world (exact float round trip)."""
    records = []
    with open(os.path.join(world_dir, "nodes.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    records.sort(key=lambda r: r["id"])
    features = np.array([r["features"] for r in records], dtype=np.float64)
    categories = np.array([r["category"] for r in records], dtype=np.int64)
    pi_rows = []
    with open(os.path.join(world_dir, "pi.csv"), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pi_rows.append([float(x) for x in line.strip().split(",")])
    with open(os.path.join(world_dir, "truth.json"), encoding="utf-8") as fh:
        payload = json.load(fh)
    return GroundTruthWorld(
        features=features,
        categories=categories,
        pi_table=np.array(pi_rows, dtype=np.float64),
        link_w=np.array(payload["w"], dtype=np.float64),
        link_b=float(payload["b"]),
        seed=int(payload.get("seed", 0)),
    )
