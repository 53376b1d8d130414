"""End-to-end loop with trained models: train, recommend, retrain.

The category-level theory from the previous demo plays out with real
models here. A naive model retrained on its own recommendations
concentrates on same-field links within a handful of rounds; the model
trained with the inverse-propensity risk term keeps recommending across
the field boundary.

Runs two 6-round pipelines (about half a minute).
"""

from linkdebias import (
    SyntheticSpec,
    TrainConfig,
    feedback_with_trained_model,
    generate_world,
)

world = generate_world(SyntheticSpec(
    n=100, n_categories=2, d=8, seed=5, target_mean_y=0.4,
    category_separation=2.0,
))
same_y = world.y_matrix()[world.categories[:, None] == world.categories]
print(f"two fields, equal relevance by construction "
      f"(mean y same-field {same_y.mean():.3f})")
print(f"exposure table:\n{world.pi_table.round(3)}\n")

naive_cfg = TrainConfig(
    learning_rate=0.1, batch_size=128, epochs=80, seed=0,
    estimator="none", negatives_per_positive=3,
)
corrected_cfg = TrainConfig(
    learning_rate=0.1, batch_size=128, epochs=80, seed=0,
    lambda_l=1.0, lambda_r=10.0, estimator="w",
    negatives_per_positive=3, warmup_epochs=50,
)

for tag, cfg in (("naive", naive_cfg), ("corrected (w)", corrected_cfg)):
    rep = feedback_with_trained_model(
        world, cfg, rec_per_node=20, iterations=6, seed=100
    )
    series = rep.same_fraction.mean(axis=1)
    print(f"{tag}: same-field share per round "
          + "  ".join(f"{v:.3f}" for v in series))

print("\nThe naive pipeline locks onto same-field recommendations; the "
      "risk-term pipeline holds its initial mix.")
