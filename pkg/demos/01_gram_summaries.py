"""Gram correlation summaries, step by step.

Feature maps become rows of a matrix; pairwise inner products form the
Gram matrix; row sums give one correlation scalar per map; min-max
rescaling puts every layer on a shared [0, 1] scale.
"""

import numpy as np

from gramsec import ActivationRecord, accumulate, gram_matrix, normalize

# two feature maps of four values each
record = ActivationRecord(
    layer_id=0,
    channels=2,
    height=2,
    width=2,
    values=np.array([[1.0, 2.0, 0.0, 1.0], [0.5, 0.5, 1.0, 0.0]], dtype=np.float32),
)

gram = gram_matrix(record)
print("gram matrix (pairwise map correlations):")
print(gram)

raw = accumulate(gram)
print("\naccumulated correlation per map (row sums):", raw)

print("rescaled to [0, 1]:", normalize(raw))

# a constant profile carries no information and maps to zeros
print("\ndegenerate profile [7, 7, 7] ->", normalize(np.array([7.0, 7.0, 7.0])))
