"""Risk estimators for link prediction under exposure bias.

Observations follow o = o' * a with o' ~ Bernoulli(y) (relevance) and
a ~ Bernoulli(pi) (exposure), so a pair is observed positive with
probability y * pi. The true risk scores predictions against y alone,
i.e. against the graph that would exist under full exposure.

Four estimators of the true risk are provided:

* ``naive`` -- loss against the observed labels, no correction.
* ``w``     -- inverse-propensity up-weighting of positives, with
  negatives down-weighted by psi = (1 - y_hat) / (1 - pi_hat * y_hat).
* ``pu``    -- positive-unlabeled style: positives up-weighted by
  1 / pi_hat and a matching negative term subtracted per positive.
* ``ap``    -- adds a positive term weighted by
  tau = y_hat * (1 - pi_hat) / (1 - pi_hat * y_hat) for each negative.

For the zero-one loss (value Delta on any misclassification) the bias
and variance of each estimator have closed forms; those are implemented
here per-pair so they can be checked against exact enumeration of the
four (o', a) outcomes (see synthesis.exact_pair_moments).
"""

from dataclasses import dataclass

import numpy as np

ESTIMATORS = ("naive", "w", "pu", "ap")

DEFAULT_PROPENSITY_FLOOR = 1e-3

# Log-loss probabilities are clamped into this interval so the loss is
# finite everywhere, as the generalization bound requires.
LOG_LOSS_CLIP = 1e-7


@dataclass(frozen=True)
class LossSpec:
    """Loss function: 'zero-one' with scale delta, or 'log'."""

    kind: str = "zero-one"
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero-one", "log"):
            raise ValueError(f"unknown loss kind: {self.kind!r}")
        if self.kind == "zero-one" and self.delta <= 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class PairEstimates:
    """Predicted link probabilities and estimated propensities per pair.

    ``o_hat`` is the thresholded prediction 1(y_hat >= 0.5); ties at
    exactly 0.5 map to 1.
    """

    y_hat: np.ndarray
    pi_hat: np.ndarray
    floor: float = DEFAULT_PROPENSITY_FLOOR

    def __post_init__(self):
        y_hat = np.atleast_1d(np.asarray(self.y_hat, dtype=np.float64))
        pi_hat = np.broadcast_to(
            np.asarray(self.pi_hat, dtype=np.float64), y_hat.shape
        ).copy()
        object.__setattr__(self, "y_hat", y_hat)
        object.__setattr__(self, "pi_hat", pi_hat)
        if np.any((y_hat <= 0) | (y_hat > 1)):
            raise ValueError("y_hat must lie in (0, 1]")
        if np.any(pi_hat > 1):
            raise ValueError("pi_hat must lie in [floor, 1]")
        if np.any(pi_hat < self.floor):
            raise ValueError(
                f"pi_hat below propensity floor {self.floor}"
            )

    @property
    def o_hat(self):
        return (self.y_hat >= 0.5).astype(np.float64)


@dataclass(frozen=True)
class GroundTruth:
    """True link probabilities y and propensities pi per pair."""

    y: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        pi = np.broadcast_to(np.asarray(self.pi, dtype=np.float64), y.shape).copy()
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "pi", pi)
        if np.any((y < 0) | (y > 1)) or np.any((pi < 0) | (pi > 1)):
            raise ValueError("y and pi must lie in [0, 1]")


@dataclass(frozen=True)
class RiskReport:
    estimator: str
    value: float
    per_pair_terms: np.ndarray = None

    @property
    def n_pairs(self):
        return 0 if self.per_pair_terms is None else int(self.per_pair_terms.size)

    def to_json_dict(self):
        return {
            "estimator": self.estimator,
            "value": float(self.value),
            "n_pairs": self.n_pairs,
        }


def psi_weight(y_hat, pi_hat):
    """Negative-example weight (1 - y_hat) / (1 - pi_hat * y_hat).

    Lies in (0, 1] for y_hat, pi_hat in (0, 1); equals 1 iff pi_hat = 1.
    The y_hat = 1 boundary is defined as 0 (the trivial-solution limit).
    """
    y_hat = np.asarray(y_hat, dtype=np.float64)
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    num = 1.0 - y_hat
    den = 1.0 - pi_hat * y_hat
    return np.where(num == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))


def tau_weight(y_hat, pi_hat):
    """Added-positive weight y_hat * (1 - pi_hat) / (1 - pi_hat * y_hat).

    Lies in [0, 1) for y_hat, pi_hat in (0, 1); equals 0 iff pi_hat = 1.
    Satisfies tau = 1 - psi away from the (y_hat, pi_hat) = (1, 1) corner.
    """
    y_hat = np.asarray(y_hat, dtype=np.float64)
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    num = y_hat * (1.0 - pi_hat)
    den = 1.0 - pi_hat * y_hat
    return np.where(num == 0.0, 0.0, num / np.where(den == 0.0, 1.0, den))


def _loss_components(est, loss):
    """Per-pair loss values (delta(1, .), delta(0, .)) for the given spec."""
    if loss.kind == "zero-one":
        o_hat = est.o_hat
        return loss.delta * (1.0 - o_hat), loss.delta * o_hat
    y = np.clip(est.y_hat, LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
    return -np.log(y), -np.log1p(-y)


def per_pair_term_values(which, est, loss):
    """Estimator term evaluated at o = 1 and o = 0, per pair.

    Returns (t1, t0) so that the per-pair contribution given an observed
    label o is ``o * t1 + (1 - o) * t0``; the estimator value is the mean
    of these contributions over the universe.
    """
    d1, d0 = _loss_components(est, loss)
    pi_hat = est.pi_hat
    if which == "naive":
        return d1, d0
    if which == "w":
        psi = psi_weight(est.y_hat, pi_hat)
        return d1 / pi_hat, psi * d0
    if which == "pu":
        return d1 / pi_hat + (1.0 - 1.0 / pi_hat) * d0, d0.copy()
    if which == "ap":
        psi = psi_weight(est.y_hat, pi_hat)
        tau = tau_weight(est.y_hat, pi_hat)
        return d1 + np.zeros_like(d0), psi * d0 + tau * d1
    raise ValueError(f"unknown estimator: {which!r}")


def _risk_report(which, o, est, loss, keep_terms):
    o = np.atleast_1d(np.asarray(o, dtype=np.float64))
    t1, t0 = per_pair_term_values(which, est, loss)
    terms = o * t1 + (1.0 - o) * t0
    return RiskReport(
        estimator=which,
        value=float(terms.mean()),
        per_pair_terms=terms if keep_terms else None,
    )


def true_risk(truth, est, loss, keep_terms=True):
    """Risk against the true link probabilities (full-exposure graph)."""
    d1, d0 = _loss_components(est, loss)
    y = truth.y
    terms = y * d1 + (1.0 - y) * d0
    return RiskReport(
        estimator="true",
        value=float(terms.mean()),
        per_pair_terms=terms if keep_terms else None,
    )


def risk_naive(o, est, loss, keep_terms=True):
    """Mean loss against the observed labels, uncorrected."""
    return _risk_report("naive", o, est, loss, keep_terms)


def risk_w(o, est, loss, keep_terms=True):
    """Inverse-propensity weighted risk estimator."""
    return _risk_report("w", o, est, loss, keep_terms)


def risk_pu(o, est, loss, keep_terms=True):
    """Positive-unlabeled risk estimator (removes negatives per positive)."""
    return _risk_report("pu", o, est, loss, keep_terms)


def risk_ap(o, est, loss, keep_terms=True):
    """Added-positives risk estimator (adds positives per negative)."""
    return _risk_report("ap", o, est, loss, keep_terms)


RISK_FUNCTIONS = {
    "naive": risk_naive,
    "w": risk_w,
    "pu": risk_pu,
    "ap": risk_ap,
}


def estimate_risk(which, o, est, loss, keep_terms=True):
    if which == "true":
        raise ValueError("true risk needs ground truth; call true_risk")
    return RISK_FUNCTIONS[which](o, est, loss, keep_terms=keep_terms)


# ---------------------------------------------------------------------------
# Closed-form bias and variance (zero-one loss only)
# ---------------------------------------------------------------------------


def _require_zero_one(loss_or_delta):
    if isinstance(loss_or_delta, LossSpec):
        if loss_or_delta.kind != "zero-one":
            raise ValueError("closed forms hold for the zero-one loss only")
        return loss_or_delta.delta
    return float(loss_or_delta)


def per_pair_bias_terms(which, truth, est, delta=1.0):
    """Signed per-pair bias E[term] - true_term under the zero-one loss.

    Summing and taking the absolute value of the mean gives the
    estimator's bias; per-pair values let the closed forms be checked
    against exact enumeration of the (o', a) outcomes.
    """
    delta = _require_zero_one(delta)
    y, pi = truth.y, truth.pi
    o_hat = est.o_hat
    pi_hat = est.pi_hat
    if which == "naive":
        inner = y * (1.0 - pi) * (1.0 - 2.0 * o_hat)
    elif which == "pu":
        inner = y * (1.0 - pi / pi_hat) * (1.0 - 2.0 * o_hat)
    elif which == "w":
        psi = psi_weight(est.y_hat, pi_hat)
        inner = (1.0 - o_hat) * y * (1.0 - pi / pi_hat) + o_hat * (
            1.0 - y - (1.0 - y * pi) * psi
        )
    elif which == "ap":
        psi = psi_weight(est.y_hat, pi_hat)
        tau = tau_weight(est.y_hat, pi_hat)
        inner = (1.0 - o_hat) * (
            (1.0 - pi) * y - (1.0 - pi * y) * tau
        ) + o_hat * (1.0 - y - (1.0 - y * pi) * psi)
    else:
        raise ValueError(f"unknown estimator: {which!r}")
    # The printed closed forms carry the sign of (truth - expectation);
    # flip so the returned values are E[estimator term] - true term.
    return -delta * inner


def per_pair_variance_terms(which, truth, est, delta=1.0):
    """Exact per-pair variance of the estimator term, zero-one loss."""
    delta = _require_zero_one(delta)
    q = truth.y * truth.pi
    base = delta**2 * q * (1.0 - q)
    pi_hat = est.pi_hat
    if which == "naive":
        return base
    if which == "pu":
        return base / pi_hat**2
    psi = psi_weight(est.y_hat, pi_hat)
    if which == "ap":
        return base * psi**2
    if which == "w":
        o_hat = est.o_hat
        return base * ((1.0 - o_hat) / pi_hat**2 + o_hat * psi**2)
    raise ValueError(f"unknown estimator: {which!r}")


def bias_closed_form(which, truth, est, delta=1.0):
    """|E[estimator] - true risk| via the closed form, zero-one loss."""
    return float(abs(per_pair_bias_terms(which, truth, est, delta).mean()))


def variance_closed_form(which, truth, est, delta=1.0):
    """Variance of the estimator (mean over independent pairs)."""
    terms = per_pair_variance_terms(which, truth, est, delta)
    return float(terms.sum() / terms.size**2)


@dataclass(frozen=True)
class VarianceOrderingReport:
    variances: dict
    ap_below_naive: bool
    ap_below_w: bool
    w_below_pu: bool
    degenerate: bool

    @property
    def holds(self):
        return self.ap_below_naive and self.ap_below_w and self.w_below_pu


def check_variance_ordering(truth, est, delta=1.0):
    """Check Var(ap) < Var(naive) and Var(ap) < Var(w) < Var(pu).

    A configuration where the naive variance vanishes (all y * pi in
    {0, 1}) is reported as degenerate: every variance is then zero and
    the ordering holds only non-strictly.
    """
    var = {
        which: variance_closed_form(which, truth, est, delta)
        for which in ESTIMATORS
    }
    degenerate = var["naive"] == 0.0
    cmp = (lambda a, b: a <= b) if degenerate else (lambda a, b: a < b)
    return VarianceOrderingReport(
        variances=var,
        ap_below_naive=cmp(var["ap"], var["naive"]),
        ap_below_w=cmp(var["ap"], var["w"]),
        w_below_pu=cmp(var["w"], var["pu"]),
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class BiasConditionReport:
    """Sufficient-condition check for the weighted estimators to beat naive.

    The propensity condition is pi / (2 - pi) < pi_hat < 1 per pair; the
    added-positives estimator additionally needs y_hat < c * y with the
    configuration-dependent constant c. Approximate biases treat only the
    negatively predicted, unobserved pairs as contributing.
    """

    pi_condition: np.ndarray
    ap_condition: np.ndarray
    c_values: np.ndarray
    approx_bias: dict
    pi_condition_holds: bool
    ap_condition_holds: bool
    weighted_equal: bool
    weighted_below_naive: bool
    ap_below_naive: bool


def bias_condition_c(truth, est):
    """Upper-bound multiplier c for the y_hat < c * y condition."""
    y, pi = truth.y, truth.pi
    pi_hat = est.pi_hat
    den = 1.0 - pi_hat - pi * y + (2.0 - pi) * pi_hat * y
    with np.errstate(divide="ignore"):
        return np.where(den > 0, 2.0 * (1.0 - pi) / np.where(den > 0, den, 1.0), np.inf)


def check_bias_conditions(truth, est, delta=1.0, o=None):
    """Evaluate the bias-dominance conditions and approximate biases.

    ``o`` restricts the approximate-bias sums to the unobserved pairs;
    when omitted all pairs are used.
    """
    delta = _require_zero_one(delta)
    y, pi = truth.y, truth.pi
    pi_hat, y_hat = est.pi_hat, est.y_hat
    lower = pi / (2.0 - pi)
    pi_cond = (lower < pi_hat) & (pi_hat < 1.0)
    c = bias_condition_c(truth, est)
    ap_cond = pi_cond & (y_hat > 0) & (y_hat < c * y)

    neg = np.ones_like(y, dtype=bool) if o is None else (
        np.atleast_1d(np.asarray(o)) == 0
    )
    n_neg = max(int(neg.sum()), 1)
    tau = tau_weight(y_hat, pi_hat)
    approx = {
        "naive": delta / n_neg * abs(float((y * (1.0 - pi))[neg].sum())),
        "w": delta / n_neg * abs(float((y * (1.0 - pi / pi_hat))[neg].sum())),
        "pu": delta / n_neg * abs(float((y * (1.0 - pi / pi_hat))[neg].sum())),
        "ap": delta
        / n_neg
        * abs(float(((1.0 - pi) * y - (1.0 - pi * y) * tau)[neg].sum())),
    }
    return BiasConditionReport(
        pi_condition=pi_cond,
        ap_condition=ap_cond,
        c_values=c,
        approx_bias=approx,
        pi_condition_holds=bool(pi_cond.all()),
        ap_condition_holds=bool(ap_cond.all()),
        weighted_equal=approx["w"] == approx["pu"],
        weighted_below_naive=approx["w"] < approx["naive"],
        ap_below_naive=approx["ap"] < approx["naive"],
    )


# ---------------------------------------------------------------------------
# Empirical Rademacher estimate over a finite candidate family
# ---------------------------------------------------------------------------


def empirical_rademacher(o, family, which, m, seed, loss=None):
    """Monte Carlo estimate of the empirical Rademacher complexity.

    ``family`` is a non-empty list of (pi_hat, y_hat) candidate pairs
    (arrays over the universe); the supremum is realized by enumerating
    the family. Averages, over ``m`` draws of independent signs
    sigma in {-1, +1}, the maximal signed mean of the per-pair
    estimator terms.
    """
    if not family:
        raise ValueError("candidate family must be non-empty")
    if m < 1:
        raise ValueError("need at least one sign draw")
    loss = loss or LossSpec("log")
    o = np.atleast_1d(np.asarray(o, dtype=np.float64))
    values = []
    for pi_hat, y_hat in family:
        est = PairEstimates(y_hat=y_hat, pi_hat=pi_hat)
        t1, t0 = per_pair_term_values(which, est, loss)
        values.append(o * t1 + (1.0 - o) * t0)
    value_matrix = np.stack(values)  # (family, pairs)
    rng = np.random.default_rng(seed)
    signs = rng.choice((-1.0, 1.0), size=(m, o.size))
    signed_means = signs @ value_matrix.T / o.size  # (m, family)
    return float(signed_means.max(axis=1).mean())
