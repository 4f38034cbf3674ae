"""Ranking layers by how well their deviations separate the classes.

A layer whose correlation profile depends on the class gets a large
Wasserstein distance between own-class and other-class deviations; a
constant layer scores zero and is dropped by the selector.
"""

import numpy as np

from gramsec import fit_bounds, score_layers, select_layers, wasserstein_1d
from gramsec.gram import GramSummary


def summary(layer_id, values):
    values = np.asarray(values, dtype=np.float64)
    return GramSummary(layer_id, values.copy(), values)


print("1-Wasserstein between small empirical distributions:")
print(f"  W({{0}}, {{1}}) = {wasserstein_1d([0.0], [1.0])}")
print(f"  W({{0,1}}, {{0.5,0.5}}) = {wasserstein_1d([0.0, 1.0], [0.5, 0.5])}")

rng = np.random.default_rng(0)
samples = []
for label in (0, 1):
    pattern = np.array([0.9, 0.1]) if label == 0 else np.array([0.1, 0.9])
    for _ in range(8):
        noisy = np.clip(pattern + rng.normal(0, 0.03, 2), 0, 1)
        # layer 0 carries the class signal, layer 1 is constant
        samples.append(([summary(0, noisy), summary(1, [0.5, 0.5])], label))

bounds = fit_bounds(samples, num_classes=2)
scores = score_layers(samples, bounds, num_classes=2)
for score in scores:
    print(f"layer {score.layer_id}: separation score {score.aggregate:.3f}")
print("selected with top_k=1:", select_layers(scores, 1))
