"""Exposure-bias-aware risk estimation, training, and feedback simulation
for link recommenders."""

__version__ = "0.1.0"

from .estimators import (
    ESTIMATORS,
    GroundTruth,
    LossSpec,
    PairEstimates,
    RiskReport,
    bias_closed_form,
    check_bias_conditions,
    check_variance_ordering,
    empirical_rademacher,
    estimate_risk,
    per_pair_bias_terms,
    per_pair_term_values,
    per_pair_variance_terms,
    psi_weight,
    risk_ap,
    risk_naive,
    risk_pu,
    risk_w,
    tau_weight,
    true_risk,
    variance_closed_form,
)
from .graph import (
    Graph,
    GraphFormatError,
    Node,
    PairUniverse,
    load_graph,
    observed_label,
    observed_vector,
    pair_universe,
    save_graph,
    universe_indices,
)
from .models import (
    GradientBundle,
    LinkModel,
    LossConfig,
    PropensityModel,
    loss_and_gradients,
    predict_link_prob,
    predict_propensity,
)
from .synthesis import (
    GroundTruthWorld,
    SyntheticSpec,
    exact_pair_moments,
    generate_world,
    load_world,
    monte_carlo_risk_distribution,
    sample_observed,
    save_world,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainReport,
    TrainingDiverged,
    adam_step,
    sample_batch,
    train,
    train_on_observations,
)
from .evaluation import (
    MetricReport,
    category_entropy,
    classification_metrics,
    entropy_at_k,
    evaluate_scores,
    rank_candidates,
    ranking_metrics,
)
from .feedback import (
    AbsorbingStateError,
    DegenerateStepError,
    FeedbackConfig,
    SimplexState,
    Trajectory,
    asymptotic_kappa,
    corrected_step,
    feedback_step,
    feedback_with_trained_model,
    run_trajectory,
)
from .validation import CheckResult, run_validation
