"""Minibatch training with negative sampling and importance reweighting.

The pair universe is quadratic in the node count, so batches pair
uniformly drawn observed edges with k uniformly drawn non-edges per
edge. Non-edges carry importance weight (|U| - |E|) / (k |E|), which
makes the weighted batch mean an unbiased estimate of the loss averaged
over the full universe.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from . import models
from .models import LinkModel, LossConfig, PropensityModel


class TrainingDiverged(RuntimeError):
    """Raised when the loss or a gradient becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    lambda_l: float = 1.0
    lambda_r: float = 0.0
    estimator: str = None
    negatives_per_positive: int = 1
    seed: int = 0
    optimizer: str = "adam"
    stop_weight_gradients: bool = True
    warmup_epochs: int = 0
    early_stop_patience: int = None
    init_scale: float = 0.01
    propensity_floor: float = 1e-3

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be >= 1")
        if self.lambda_r > 0 and self.lambda_l <= 0:
            raise ValueError("lambda_l must be positive when lambda_r > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer: {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size >= 1 and epochs >= 0 required")

    def loss_config(self):
        return LossConfig(
            lambda_l=self.lambda_l,
            lambda_r=self.lambda_r,
            estimator=self.estimator,
            stop_weight_gradients=self.stop_weight_gradients,
        )


@dataclass
class TrainReport:
    loss_trace: list
    link_model: LinkModel
    propensity_model: PropensityModel
    seed: int
    wall_clock: float
    stopped_epoch: int = None

    def to_json_dict(self):
        """Deterministic fields only; wall clock stays out of data files."""
        return {
            "loss_trace": [float(x) for x in self.loss_trace],
            "seed": int(self.seed),
            "stopped_epoch": self.stopped_epoch,
        }


def negative_weight(n_nodes, n_edges, k):
    """Importance weight for sampled non-edges."""
    universe = n_nodes * (n_nodes - 1)
    return (universe - n_edges) / (k * n_edges)


def sample_batch(g, cfg, rng):
    """Sample (i, j, o, weight) arrays: edges plus k non-edges per edge."""
    if g.n_edges == 0:
        raise ValueError("graph has no positive edges to sample")
    b = cfg.batch_size
    pos = g.edges[rng.integers(0, g.n_edges, size=b)]
    k = cfg.negatives_per_positive
    need = b * k
    neg = np.empty((0, 2), dtype=np.int64)
    while neg.shape[0] < need:
        cand_i = rng.integers(0, g.n, size=2 * need)
        cand_j = rng.integers(0, g.n, size=2 * need)
        ok = cand_i != cand_j
        cand = np.stack([cand_i[ok], cand_j[ok]], axis=1)
        fresh = ~g.edge_mask(cand[:, 0], cand[:, 1])
        neg = np.concatenate([neg, cand[fresh]])
    neg = neg[:need]
    i = np.concatenate([pos[:, 0], neg[:, 0]])
    j = np.concatenate([pos[:, 1], neg[:, 1]])
    o = np.concatenate([np.ones(b), np.zeros(need)])
    w = np.concatenate(
        [np.ones(b), np.full(need, negative_weight(g.n, g.n_edges, k))]
    )
    return i, j, o, w


@dataclass
class AdamState:
    """First/second moment accumulators for a named set of parameters."""

    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params):
        return cls(
            m={k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()},
            v={k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()},
        )

    def to_json_dict(self):
        return {
            "m": {k: np.asarray(v).tolist() for k, v in self.m.items()},
            "v": {k: np.asarray(v).tolist() for k, v in self.v.items()},
            "t": self.t,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }

    @classmethod
    def from_json_dict(cls, payload):
        return cls(
            m={k: np.array(v, dtype=np.float64) for k, v in payload["m"].items()},
            v={k: np.array(v, dtype=np.float64) for k, v in payload["v"].items()},
            t=payload["t"],
            beta1=payload["beta1"],
            beta2=payload["beta2"],
            eps=payload["eps"],
        )


def adam_step(params, grads, state, lr):
    """One Adam update; returns new params dict, mutates state in place."""
    state.t += 1
    out = {}
    for key, value in params.items():
        g = np.asarray(grads[key], dtype=np.float64)
        state.m[key] = state.beta1 * state.m[key] + (1 - state.beta1) * g
        state.v[key] = state.beta2 * state.v[key] + (1 - state.beta2) * g**2
        m_hat = state.m[key] / (1 - state.beta1**state.t)
        v_hat = state.v[key] / (1 - state.beta2**state.t)
        out[key] = value - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


def sgd_step(params, grads, lr):
    return {k: v - lr * np.asarray(grads[k]) for k, v in params.items()}


def _init_params(d, n_categories, cfg, rng):
    s = cfg.init_scale
    return {
        "w": rng.uniform(-s, s, size=d),
        "b": rng.uniform(-s, s),
        "theta": rng.uniform(-s, s, size=(n_categories, n_categories)),
    }


def _to_models(params, cfg):
    return (
        LinkModel(w=params["w"], b=float(params["b"])),
        PropensityModel(logits=params["theta"], floor=cfg.propensity_floor),
    )


def validation_nll(link, prop, features, categories, i, j, o, cfg):
    loss, _ = models.loss_and_gradients(
        link, prop, features, categories, i, j, o,
        LossConfig(lambda_l=1.0, lambda_r=0.0, estimator=cfg.estimator if cfg.estimator == "none" else None),
    )
    return loss


def fit(features, categories, n_categories, batches, cfg, val_pairs=None,
        init=None, exposure_base=None):
    """Core loop: consume an iterable of epochs of batches, return a report.

    ``batches`` yields, per epoch, a list of (i, j, o, weights) tuples.
    ``init`` optionally warm-starts from (LinkModel, PropensityModel).
    ``exposure_base`` is an optional (n, n) matrix of known exposure
    factors multiplying the learned propensity.
    """
    rng = np.random.default_rng(cfg.seed)
    params = _init_params(features.shape[1], n_categories, cfg, rng)
    if init is not None:
        link0, prop0 = init
        params = {
            "w": link0.w.copy(),
            "b": np.float64(link0.b),
            "theta": prop0.logits.copy(),
        }
    state = AdamState.for_params(params) if cfg.optimizer == "adam" else None
    loss_cfg = cfg.loss_config()
    trace = []
    best = (np.inf, params, None)
    bad_epochs = 0
    stopped = None
    started = time.perf_counter()
    for epoch, epoch_batches in enumerate(batches):
        epoch_losses = []
        for i, j, o, w in epoch_batches:
            link, prop = _to_models(params, cfg)
            base = None if exposure_base is None else exposure_base[i, j]
            loss, grads = models.loss_and_gradients(
                link, prop, features, categories, i, j, o, loss_cfg,
                weights=w, exposure_base=base,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}: {loss!r}"
                )
            grad_dict = {"w": grads.d_w, "b": grads.d_b, "theta": grads.d_logits}
            if cfg.optimizer == "adam":
                params = adam_step(params, grad_dict, state, cfg.learning_rate)
            else:
                params = sgd_step(params, grad_dict, cfg.learning_rate)
            epoch_losses.append(loss)
        trace.append(float(np.mean(epoch_losses)) if epoch_losses else np.nan)
        if val_pairs is not None and cfg.early_stop_patience is not None:
            link, prop = _to_models(params, cfg)
            vi, vj, vo = val_pairs
            val = validation_nll(
                link, prop, features, categories, vi, vj, vo, cfg
            )
            if val < best[0]:
                best = (val, params, epoch)
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= cfg.early_stop_patience:
                    params = best[1]
                    stopped = epoch
                    break
    link, prop = _to_models(params, cfg)
    return TrainReport(
        loss_trace=trace,
        link_model=link,
        propensity_model=prop,
        seed=cfg.seed,
        wall_clock=time.perf_counter() - started,
        stopped_epoch=stopped,
    )


def train(g, cfg, val_pairs=None, init=None, exposure_base=None):
    """Train on an observed graph with negative-sampled minibatches.

    When ``cfg.warmup_epochs`` > 0, those first epochs run with the risk
    term switched off so the likelihood settles before the risk term
    starts moving the propensity/link split.
    """
    if cfg.epochs and g.n_edges == 0:
        raise ValueError("graph has no positive edges to sample")
    batch_rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, 0xBA7C4]))

    steps = max(1, -(-g.n_edges // cfg.batch_size)) if g.n_edges else 0

    def epochs_for(n_epochs):
        for _ in range(n_epochs):
            yield [sample_batch(g, cfg, batch_rng) for _ in range(steps)]

    warmup = min(cfg.warmup_epochs, cfg.epochs) if cfg.lambda_r > 0 else 0
    if warmup:
        warm_cfg = replace(cfg, lambda_r=0.0, estimator=None, epochs=warmup)
        warm = fit(
            g.features, g.categories, g.n_categories, epochs_for(warmup),
            warm_cfg, init=init, exposure_base=exposure_base,
        )
        init = (warm.link_model, warm.propensity_model)
        main_cfg = replace(cfg, epochs=cfg.epochs - warmup)
        report = fit(
            g.features, g.categories, g.n_categories,
            epochs_for(main_cfg.epochs), main_cfg,
            val_pairs=val_pairs, init=init, exposure_base=exposure_base,
        )
        report.loss_trace = warm.loss_trace + report.loss_trace
        report.wall_clock += warm.wall_clock
        return report

    return fit(
        g.features, g.categories, g.n_categories, epochs_for(cfg.epochs),
        cfg, val_pairs=val_pairs, init=init, exposure_base=exposure_base,
    )


def train_on_observations(features, categories, n_categories, i, j, o, cfg):
    """Train on a fixed list of labeled pairs (uniform batches, no weights)."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    o = np.asarray(o, dtype=np.float64)
    if i.size == 0:
        raise ValueError("no observations")
    batch_rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, 0x0B5]))
    steps = max(1, -(-i.size // cfg.batch_size))

    def epochs():
        for _ in range(cfg.epochs):
            out = []
            for _ in range(steps):
                idx = batch_rng.integers(0, i.size, size=cfg.batch_size)
                out.append((i[idx], j[idx], o[idx], None))
            yield out

    return fit(features, categories, n_categories, epochs(), cfg)
