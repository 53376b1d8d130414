"""Feedback loops at category level: drift, its rate, and the fix.

A recommender retrained on its own recommendations starves whatever it
under-recommends. With two categories whose observed link rates q
differ by a factor c, the share of the stronger category after t
rounds approaches 1 - 1/(1 + c^t); dividing the counts by the known
exposure probabilities removes the drift whenever the underlying
relevance is equal.

Writes trajectory CSVs next to this script for plotting.
"""

import os

import numpy as np

from linkdebias import FeedbackConfig, asymptotic_kappa, run_trajectory

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

# Naive loop: category 0 is twice as likely to produce an observed link.
naive_cfg = FeedbackConfig(q=[0.8, 0.4], n=100_000, steps=8, seed=0)
naive = run_trajectory(naive_cfg)
series = naive.pairwise_series(0, 1)
print("naive loop, q = [0.8, 0.4] (ratio c = 2):")
print("  t :", "  ".join(f"{t:6d}" for t in range(len(series))))
print("  share :", "  ".join(f"{v:.4f}" for v in series))
print("  limit :", "  ".join(
    f"{asymptotic_kappa(2.0, t):.4f}" for t in range(len(series))
))
naive.to_csv(os.path.join(out_dir, "naive_trajectory.csv"))

# Corrected loop: same exposure imbalance, equal relevance.
corrected_cfg = FeedbackConfig(
    q=[0.72, 0.48], y=[0.8, 0.8], n=100_000, steps=8,
    mode="corrected", seed=0,
)
corrected = run_trajectory(corrected_cfg)
series_c = corrected.pairwise_series(0, 1)
print("\ncorrected loop, exposure 0.9 vs 0.6 but equal relevance 0.8:")
print("  share :", "  ".join(f"{v:.4f}" for v in series_c))
print(f"  max drift from the initial share: "
      f"{np.max(np.abs(series_c - series_c[0])):.4f}")
corrected.to_csv(os.path.join(out_dir, "corrected_trajectory.csv"))

print(f"\nwrote CSVs to {out_dir}")
