"""The piecewise out-of-range penalty and per-layer deviations.

Values inside a class's calibrated [lower, upper] range cost nothing;
outside, the overshoot is scaled by the violated bound's magnitude.
"""

import numpy as np

from gramsec import ClassLayerStats, delta, layer_deviation
from gramsec.gram import GramSummary

print("delta(0.2, 0.8, g) for a sweep of g:")
for g in (0.0, 0.1, 0.2, 0.5, 0.8, 1.0, 1.4):
    print(f"  g={g:<4} -> {delta(0.2, 0.8, g):.4f}")

stats = ClassLayerStats(
    label=0,
    layer_id=0,
    lower=np.array([0.1, 0.4, 0.0]),
    upper=np.array([0.3, 0.9, 0.2]),
    expected_dev=1.0,
)
summary = GramSummary(0, np.zeros(3), np.array([0.05, 0.5, 0.5]))
print("\nper-layer deviation sums the per-channel penalties:")
print(f"  layer deviation = {layer_deviation(summary, stats):.4f}")
print("  (channel 0 undershoots, channel 1 is in range, channel 2 overshoots)")
