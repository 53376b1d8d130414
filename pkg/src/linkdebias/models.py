"""Parametric link-probability and propensity models with exact gradients.

The link model scores a pair through the element-wise product of the
endpoint features: y_hat = sigmoid(w . (h_i * h_j) + b). Propensities
depend only on the category pair and are parameterized as
sigmoid(logits[c_i, c_j]) clamped to [floor, 1].

The combined training objective is

    lambda_L * NLL(o | y_hat * pi_hat) + lambda_R * R(pi_hat, y_hat)

where R is one of the debiased risk estimators evaluated with the
log-loss (the thresholded zero-one loss is evaluation-only). All
derivatives, including those through the estimator weights psi and tau,
are coded analytically; ``stop_weight_gradients`` freezes the weights
for ablation.
"""

from dataclasses import dataclass

import numpy as np

from .estimators import DEFAULT_PROPENSITY_FLOOR, LOG_LOSS_CLIP

VALID_RISK_ESTIMATORS = ("w", "pu", "ap")


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


@dataclass(frozen=True)
class LinkModel:
    """Linear-sigmoid link probability model: weights over h_i * h_j."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if not (np.isfinite(w).all() and np.isfinite(self.b)):
            raise ValueError("parameters must be finite")

    @property
    def d(self):
        return self.w.shape[0]

    def predict_pairs(self, features, i, j):
        prod = features[i] * features[j]
        return sigmoid(prod @ self.w + self.b)

    def score_matrix(self, features):
        """(n, n) matrix of y_hat over all ordered pairs (diagonal invalid)."""
        return sigmoid((features * self.w) @ features.T + self.b)


def predict_link_prob(model, h_i, h_j):
    """sigmoid(w . (h_i * h_j) + b); symmetric in its endpoints."""
    h_i = np.asarray(h_i, dtype=np.float64)
    h_j = np.asarray(h_j, dtype=np.float64)
    if h_i.shape != h_j.shape or h_i.shape != model.w.shape:
        raise ValueError("feature dimension mismatch")
    return float(sigmoid(model.w @ (h_i * h_j) + model.b))


@dataclass(frozen=True)
class PropensityModel:
    """Category-pair propensity table, sigmoid(logits) clamped to [floor, 1]."""

    logits: np.ndarray
    floor: float = DEFAULT_PROPENSITY_FLOOR

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        object.__setattr__(self, "logits", logits)
        if logits.ndim != 2 or logits.shape[0] != logits.shape[1]:
            raise ValueError("logits must be a square matrix")
        if not np.isfinite(logits).all():
            raise ValueError("parameters must be finite")

    @property
    def n_categories(self):
        return self.logits.shape[0]

    def predict_pairs(self, cat_i, cat_j, exposure_base=None):
        """Propensity per pair; ``exposure_base`` optionally multiplies in a
        known per-pair exposure probability (e.g. a logged recommendation
        rate), leaving the learned table to model the residual."""
        pi = sigmoid(self.logits[cat_i, cat_j])
        if exposure_base is not None:
            pi = pi * np.asarray(exposure_base, dtype=np.float64)
        return np.clip(pi, self.floor, 1.0)

    def table(self):
        return np.clip(sigmoid(self.logits), self.floor, 1.0)


def predict_propensity(model, cat_i, cat_j):
    C = model.n_categories
    if not (0 <= cat_i < C and 0 <= cat_j < C):
        raise ValueError(f"category out of range [0, {C})")
    return float(model.predict_pairs(cat_i, cat_j))


@dataclass(frozen=True)
class GradientBundle:
    d_w: np.ndarray
    d_b: float
    d_logits: np.ndarray

    def __post_init__(self):
        if not (
            np.isfinite(self.d_w).all()
            and np.isfinite(self.d_b)
            and np.isfinite(self.d_logits).all()
        ):
            raise FloatingPointError("non-finite gradient")


@dataclass(frozen=True)
class LossConfig:
    """Weights and estimator choice for the combined objective.

    ``estimator`` is one of 'w', 'pu', 'ap' (risk-regularized), None
    (likelihood only), or 'none' (no propensity model in the likelihood:
    the naive baseline trained on observed labels alone).
    """

    lambda_l: float = 1.0
    lambda_r: float = 0.0
    estimator: str = None
    stop_weight_gradients: bool = False

    def __post_init__(self):
        if self.lambda_l <= 0:
            raise ValueError("lambda_l must be positive (trivial-solution guard)")
        if self.lambda_r < 0:
            raise ValueError("lambda_r must be non-negative")
        if self.lambda_r > 0 and self.estimator not in VALID_RISK_ESTIMATORS:
            raise ValueError(
                "lambda_r > 0 requires estimator in "
                f"{VALID_RISK_ESTIMATORS}, got {self.estimator!r}"
            )
        if self.estimator not in VALID_RISK_ESTIMATORS + ("none", None):
            raise ValueError(f"unknown estimator: {self.estimator!r}")


def _log_terms_and_grads(y_hat):
    """d1 = -log y_hat, d0 = -log(1 - y_hat) with derivatives in y_hat."""
    yc = np.clip(y_hat, LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
    d1 = -np.log(yc)
    d0 = -np.log1p(-yc)
    return d1, d0, -1.0 / yc, 1.0 / (1.0 - yc)


def _risk_term(estimator, o, y_hat, pi_hat, stop_weights):
    """Per-pair log-loss estimator term and its partials in (y_hat, pi_hat).

    Divisions use the clipped y_hat, so the derivatives are exact wherever
    the log-loss clip is inactive and stay finite under saturation.
    """
    y_hat = np.clip(y_hat, LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
    d1, d0, g1, g0 = _log_terms_and_grads(y_hat)
    pos = o
    neg = 1.0 - o
    den = 1.0 - pi_hat * y_hat
    psi = (1.0 - y_hat) / den
    tau = y_hat * (1.0 - pi_hat) / den

    if estimator == "w":
        r = pos * d1 / pi_hat + neg * psi * d0
        dr_dy = pos * g1 / pi_hat + neg * psi * g0
        dr_dpi = np.zeros_like(r)
        if not stop_weights:
            dpsi_dy = (pi_hat - 1.0) / den**2
            dpsi_dpi = y_hat * (1.0 - y_hat) / den**2
            dr_dy = dr_dy + neg * dpsi_dy * d0
            dr_dpi = pos * (-d1 / pi_hat**2) + neg * dpsi_dpi * d0
    elif estimator == "pu":
        r = pos * (d1 / pi_hat + (1.0 - 1.0 / pi_hat) * d0) + neg * d0
        dr_dy = pos * (g1 / pi_hat + (1.0 - 1.0 / pi_hat) * g0) + neg * g0
        if stop_weights:
            dr_dpi = np.zeros_like(r)
        else:
            dr_dpi = pos * (d0 - d1) / pi_hat**2
    elif estimator == "ap":
        r = pos * d1 + neg * (psi * d0 + tau * d1)
        dr_dy = pos * g1 + neg * (psi * g0 + tau * g1)
        dr_dpi = np.zeros_like(r)
        if not stop_weights:
            dpsi_dy = (pi_hat - 1.0) / den**2
            dpsi_dpi = y_hat * (1.0 - y_hat) / den**2
            dtau_dy = (1.0 - pi_hat) / den**2
            dtau_dpi = -y_hat * (1.0 - y_hat) / den**2
            dr_dy = dr_dy + neg * (dpsi_dy * d0 + dtau_dy * d1)
            dr_dpi = neg * (dpsi_dpi * d0 + dtau_dpi * d1)
    else:
        raise ValueError(f"unknown estimator: {estimator!r}")
    return r, dr_dy, dr_dpi


def loss_and_gradients(link, prop, features, categories, i, j, o, cfg,
                       weights=None, exposure_base=None):
    """Combined loss and its exact gradient over a batch of pairs.

    The batch loss is the weighted mean of per-pair losses (weights
    default to 1, giving plain mean semantics). ``exposure_base``
    optionally supplies a known per-pair exposure factor multiplying the
    learned propensity. Returns (loss, GradientBundle); non-finite
    gradients raise.
    """
    i = np.atleast_1d(np.asarray(i, dtype=np.int64))
    j = np.atleast_1d(np.asarray(j, dtype=np.int64))
    o = np.atleast_1d(np.asarray(o, dtype=np.float64))
    if i.size == 0:
        raise ValueError("batch must be non-empty")
    w_batch = (
        np.ones_like(o) if weights is None
        else np.atleast_1d(np.asarray(weights, dtype=np.float64))
    )
    w_norm = w_batch / w_batch.sum()

    prod = features[i] * features[j]
    z = prod @ link.w + link.b
    y_hat = sigmoid(z)
    dy_dz = y_hat * (1.0 - y_hat)

    if cfg.estimator == "none":
        # Naive baseline: likelihood of the observations under y_hat alone.
        yc = np.clip(y_hat, LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
        nll = -o * np.log(yc) - (1.0 - o) * np.log1p(-yc)
        dl_dy = cfg.lambda_l * (-o / yc + (1.0 - o) / (1.0 - yc))
        loss = cfg.lambda_l * float(w_norm @ nll)
        coef = w_norm * dl_dy * dy_dz
        bundle = GradientBundle(
            d_w=prod.T @ coef,
            d_b=float(coef.sum()),
            d_logits=np.zeros_like(prop.logits),
        )
        return loss, bundle

    ci = categories[i]
    cj = categories[j]
    logits = prop.logits[ci, cj]
    pi_raw = sigmoid(logits)
    base = (
        np.ones_like(pi_raw) if exposure_base is None
        else np.atleast_1d(np.asarray(exposure_base, dtype=np.float64))
    )
    pi_hat = np.clip(base * pi_raw, prop.floor, 1.0)
    clamp_free = (base * pi_raw >= prop.floor).astype(np.float64)
    dpi_dlogit = base * pi_raw * (1.0 - pi_raw) * clamp_free

    y_safe = np.clip(y_hat, LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
    m = np.clip(y_safe * pi_hat, LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
    nll = -o * np.log(m) - (1.0 - o) * np.log1p(-m)
    dnll_dy = -o / y_safe + (1.0 - o) * pi_hat / (1.0 - m)
    dnll_dpi = -o / pi_hat + (1.0 - o) * y_safe / (1.0 - m)

    per_pair = cfg.lambda_l * nll
    dl_dy = cfg.lambda_l * dnll_dy
    dl_dpi = cfg.lambda_l * dnll_dpi
    if cfg.lambda_r > 0:
        r, dr_dy, dr_dpi = _risk_term(
            cfg.estimator, o, y_hat, pi_hat, cfg.stop_weight_gradients
        )
        per_pair = per_pair + cfg.lambda_r * r
        dl_dy = dl_dy + cfg.lambda_r * dr_dy
        dl_dpi = dl_dpi + cfg.lambda_r * dr_dpi

    loss = float(w_norm @ per_pair)
    coef_y = w_norm * dl_dy * dy_dz
    coef_pi = w_norm * dl_dpi * dpi_dlogit
    d_logits = np.zeros_like(prop.logits)
    np.add.at(d_logits, (ci, cj), coef_pi)
    bundle = GradientBundle(
        d_w=prod.T @ coef_y,
        d_b=float(coef_y.sum()),
        d_logits=d_logits,
    )
    return loss, bundle


def save_checkpoint(link, prop, path):
    import json

    payload = {
        "w": [float(x) for x in link.w],
        "b": float(link.b),
        "theta": [[float(x) for x in row] for row in prop.logits],
        "floor": float(prop.floor),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    import json

    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    link = LinkModel(w=np.array(payload["w"], dtype=np.float64), b=payload["b"])
    prop = PropensityModel(
        logits=np.array(payload["theta"], dtype=np.float64),
        floor=payload.get("floor", DEFAULT_PROPENSITY_FLOOR),
    )
    return link, prop
