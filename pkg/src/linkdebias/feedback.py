"""Iterative-recommendation feedback loops over node categories.

Each category-v slot of the simplex kappa receives n * kappa_v
recommendations; links form with probability q_v = pi_v * y_v. The
naive loop re-normalizes the raw per-category link counts, so poorly
exposed categories lose recommendation share each step at a rate set by
the q ratios. The corrected loop divides the counts by the known
exposure probabilities, leaving only relevance ratios to drive drift.

The asymptotic share of category v relative to w after t steps is
1 - 1/(1 + c^t), with c the q-ratio (naive) or the y-ratio (corrected).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import training
from .graph import Graph
from .synthesis import sample_observed


class DegenerateStepError(RuntimeError):
    """All estimated link rates were zero; the process cannot continue."""


class AbsorbingStateError(RuntimeError):
    """A category's recommendation share hit zero in corrected mode."""


@dataclass(frozen=True)
class FeedbackConfig:
    """Configuration for a category-level feedback trajectory.

    ``q`` holds the per-category products pi_v * y_v; corrected mode
    additionally needs the link probabilities ``y`` so exposure can be
    divided out. ``initial`` is 'uniform', 'q-proportional', or an
    explicit simplex.
    """

    q: np.ndarray
    n: int = 10000
    steps: int = 5
    mode: str = "naive"
    seed: int = 0
    y: np.ndarray = None
    exploration: float = 0.0
    initial: object = "uniform"

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        object.__setattr__(self, "q", q)
        if np.any((q <= 0) | (q >= 1)):
            raise ValueError("q entries must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.mode not in ("naive", "corrected"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.mode == "corrected":
            if self.y is None:
                raise ValueError("corrected mode requires y values")
            y = np.asarray(self.y, dtype=np.float64)
            object.__setattr__(self, "y", y)
            if y.shape != q.shape:
                raise ValueError("y must match q in shape")
            if np.any((y <= 0) | (y > 1)) or np.any(q > y):
                raise ValueError("y must lie in (0, 1] with q <= y")
        if not 0.0 <= self.exploration < 1.0:
            raise ValueError("exploration must lie in [0, 1)")

    @property
    def n_categories(self):
        return self.q.size

    def initial_kappa(self):
        C = self.n_categories
        if isinstance(self.initial, str):
            if self.initial == "uniform":
                return np.full(C, 1.0 / C)
            if self.initial == "q-proportional":
                return self.q / self.q.sum()
            raise ValueError(f"unknown initial: {self.initial!r}")
        kappa = np.asarray(self.initial, dtype=np.float64)
        if kappa.shape != (C,) or abs(kappa.sum() - 1.0) > 1e-9:
            raise ValueError("initial must be a length-C simplex")
        return kappa


@dataclass(frozen=True)
class SimplexState:
    kappa: np.ndarray
    t: int

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=np.float64)
        object.__setattr__(self, "kappa", kappa)
        if np.any(kappa < 0) or abs(kappa.sum() - 1.0) > 1e-12:
            raise ValueError("kappa must be a simplex (sum 1 within 1e-12)")

    def pairwise_fraction(self, v, w):
        denom = self.kappa[v] + self.kappa[w]
        return float(self.kappa[v] / denom) if denom else float("nan")


@dataclass(frozen=True)
class StepRecord:
    counts: np.ndarray
    q_hat: np.ndarray
    e_hat: np.ndarray


def allocate_slots(kappa, n):
    """Integer recommendation counts per category summing exactly to n.

    Largest-remainder rounding of n * kappa; remainder ties break on the
    lower category index.
    """
    raw = np.asarray(kappa, dtype=np.float64) * n
    base = np.floor(raw).astype(np.int64)
    short = int(n - base.sum())
    if short:
        remainders = raw - base
        order = np.lexsort((np.arange(raw.size), -remainders))
        base[order[:short]] += 1
    return base


def normalized_estimates(counts, n, exploration=0.0):
    """Normalize per-category link counts into next-step shares."""
    counts = np.asarray(counts, dtype=np.float64)
    q_hat = counts / n
    total = q_hat.sum()
    if total == 0:
        raise DegenerateStepError(
            "all estimated link rates are zero; halting the process"
        )
    e_hat = q_hat / total
    if exploration:
        e_hat = (1 - exploration) * e_hat + exploration / counts.size
    return q_hat, e_hat


def feedback_step(state, cfg, rng):
    """One naive update: count links, renormalize, redraw the simplex."""
    slots = allocate_slots(state.kappa, cfg.n)
    counts = rng.binomial(slots, cfg.q)
    q_hat, e_hat = normalized_estimates(counts, cfg.n, cfg.exploration)
    kappa_next = rng.multinomial(cfg.n, e_hat) / cfg.n
    return (
        SimplexState(kappa=kappa_next, t=state.t + 1),
        StepRecord(counts=counts, q_hat=q_hat, e_hat=e_hat),
    )


def corrected_step(state, cfg, rng):
    """One exposure-corrected update: divide counts by known propensities.

    The resulting shares estimate kappa_v * y_v, so with equal link
    probabilities the simplex is stationary regardless of exposure.
    """
    if np.any(state.kappa == 0):
        raise AbsorbingStateError(
            "a category has zero recommendation share; corrected scores "
            "are undefined for it"
        )
    slots = allocate_slots(state.kappa, cfg.n)
    counts = rng.binomial(slots, cfg.q)
    pi = cfg.q / cfg.y
    q_hat, e_hat = normalized_estimates(counts / pi, cfg.n, cfg.exploration)
    kappa_next = rng.multinomial(cfg.n, e_hat) / cfg.n
    return (
        SimplexState(kappa=kappa_next, t=state.t + 1),
        StepRecord(counts=counts, q_hat=q_hat, e_hat=e_hat),
    )


def asymptotic_kappa(c, t):
    """Large-n pairwise share of the higher-q category after t steps."""
    if c <= 0:
        raise ValueError("ratio c must be positive")
    return 1.0 - 1.0 / (1.0 + float(c) ** t)


@dataclass
class Trajectory:
    states: list
    records: list  # one per transition, len == len(states) - 1

    def kappa_series(self):
        return np.stack([s.kappa for s in self.states])

    def pairwise_series(self, v, w):
        return np.array([s.pairwise_fraction(v, w) for s in self.states])

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,category,kappa,count,q_hat\n")
            for idx, state in enumerate(self.states):
                record = self.records[idx] if idx < len(self.records) else None
                for c, kappa in enumerate(state.kappa):
                    count = "" if record is None else str(int(record.counts[c]))
                    q_hat = "" if record is None else repr(float(record.q_hat[c]))
                    fh.write(f"{state.t},{c},{repr(float(kappa))},{count},{q_hat}\n")


def run_trajectory(cfg):
    """Simulate cfg.steps transitions from the configured initial simplex."""
    rng = np.random.default_rng(cfg.seed)
    step = feedback_step if cfg.mode == "naive" else corrected_step
    state = SimplexState(kappa=cfg.initial_kappa(), t=0)
    states, records = [state], []
    for _ in range(cfg.steps):
        state, record = step(state, cfg, rng)
        states.append(state)
        records.append(record)
    return Trajectory(states=states, records=records)


# ---------------------------------------------------------------------------
# Full pipeline: retrain a link model on its own recommendations
# ---------------------------------------------------------------------------


@dataclass
class PipelineReport:
    """Per-round same-category recommendation fractions.

    ``same_fraction[r, c]`` is, at round r, the fraction of the
    recommendations made for sources in category c that point to
    category c. One row per recommendation round (rounds = retrains + 1).
    """

    same_fraction: np.ndarray
    edge_counts: list
    rounds: int

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("round,category,same_category_fraction\n")
            for r in range(self.same_fraction.shape[0]):
                for c in range(self.same_fraction.shape[1]):
                    fh.write(f"{r},{c},{repr(float(self.same_fraction[r, c]))}\n")


def _map_categories(categories, category_map):
    if category_map is None:
        return np.asarray(categories)
    return np.asarray([category_map[int(c)] for c in categories])


def _recommend(scores, rec_per_node, rng):
    """Sample rec_per_node slot draws per source, proportional to scores.

    Slots are drawn independently (a popular target can fill several
    slots), which makes the per-pair recommendation probability exactly
    1 - (1 - p_ij)^rec_per_node -- a known exposure factor the next
    round's training can condition on.
    """
    n = scores.shape[0]
    probs = scores.copy()
    np.fill_diagonal(probs, 0.0)
    probs = probs / probs.sum(axis=1, keepdims=True)
    cum = np.cumsum(probs, axis=1)
    draws = rng.random((n, rec_per_node))
    recs = np.empty((n, rec_per_node), dtype=np.int64)
    for i in range(n):
        recs[i] = np.searchsorted(cum[i], draws[i])
    rec_prob = 1.0 - (1.0 - probs) ** rec_per_node
    return recs, rec_prob


def feedback_with_trained_model(world, train_cfg, rec_per_node, iterations,
                                seed=0, category_map=None, warm_start=True):
    """Train, recommend proportional to scores, simulate users, retrain.

    The first round trains on an organically observed graph; each later
    round trains on the graph whose edges are the links users formed
    with the previous round's recommendations (with true exposure
    applied). Later rounds see the previous round's recommendation
    probabilities as a known exposure factor, and by default warm-start
    from the previous round's parameters (the user-side propensities are
    stationary across rounds). Returns the same-category recommendation
    fraction per round for each (mapped) category.
    """
    cats = _map_categories(world.categories, category_map)
    n_cats = int(cats.max()) + 1
    if n_cats != 2:
        raise ValueError("pipeline expects exactly 2 mapped categories")
    rng = np.random.default_rng(seed)
    y = world.y_matrix()
    pi = world.pi_matrix()
    n = world.n

    graph_edges = sample_observed(world, rng).edges
    exposure_base = None  # organic first round: full candidate exposure
    fractions = []
    edge_counts = []
    init = None
    for rounds_done in range(iterations + 1):
        if graph_edges.shape[0] == 0:
            raise DegenerateStepError(
                "no links survive the previous round; cannot retrain"
            )
        g = Graph(
            features=world.features,
            categories=cats,
            edges=graph_edges,
            n_categories=n_cats,
        )
        edge_counts.append(g.n_edges)
        cfg = replace(train_cfg, seed=train_cfg.seed + 7919 * rounds_done)
        report = training.train(
            g, cfg, init=init, exposure_base=exposure_base
        )
        if warm_start:
            init = (report.link_model, report.propensity_model)
        scores = report.link_model.score_matrix(world.features)

        recs, rec_prob = _recommend(scores, rec_per_node, rng)
        src = np.repeat(np.arange(n), rec_per_node)
        dst = recs.reshape(-1)
        same = cats[src] == cats[dst]
        fractions.append(
            [float(same[cats[src] == c].mean()) for c in range(n_cats)]
        )

        # A recommended pair is exposed with the user-side propensity and
        # links with the relevance probability; duplicate slots collapse.
        pair_src, pair_dst = np.unique(
            np.stack([src, dst], axis=1), axis=0
        ).T
        exposed = rng.random(pair_src.size) < pi[pair_src, pair_dst]
        relevant = rng.random(pair_src.size) < y[pair_src, pair_dst]
        linked = exposed & relevant
        graph_edges = np.stack(
            [pair_src[linked], pair_dst[linked]], axis=1
        )
        exposure_base = rec_prob  # known system-side exposure next round
    return PipelineReport(
        same_fraction=np.array(fractions),
        edge_counts=edge_counts,
        rounds=iterations + 1,
    )
