"""Gram-matrix correlation summaries of layer activations.

Per layer, the K feature maps are flattened into the rows of a matrix F.
The Gram matrix F @ F.T holds all pairwise map correlations; its row sums
give one accumulated-correlation scalar per feature map, which are then
min-max rescaled so summaries from layers of different magnitude share one
scale. All arithmetic is float64 regardless of the float32 storage format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interchange import ActivationRecord, SampleActivations


class GramOverflowError(FloatingPointError):
    """A correlation product left the finite float64 range."""


@dataclass(eq=False)
class GramSummary:
    """Accumulated pairwise correlations of one layer, raw and rescaled."""

    layer_id: int
    raw: np.ndarray  # shape (K,), float64
    normalized: np.ndarray  # shape (K,), float64, in [0, 1]

    @property
    def channels(self) -> int:
        return self.raw.size

    def __eq__(self, other):
        if not isinstance(other, GramSummary):
            return NotImplemented
        return (
            self.layer_id == other.layer_id
            and np.array_equal(self.raw, other.raw)
            and np.array_equal(self.normalized, other.normalized)
        )


def gram_matrix(record: ActivationRecord) -> np.ndarray:
    """K x K matrix of pairwise feature-map inner products.

    Exactly symmetric by construction: the upper triangle is computed once
    and mirrored onto the lower.
    """
    flat = record.values.astype(np.float64)
    gram = flat @ flat.T
    gram = np.triu(gram) + np.triu(gram, 1).T
    if not np.all(np.isfinite(gram)):
        bad = np.argwhere(~np.isfinite(gram))[0]
        raise GramOverflowError(
            f"layer {record.layer_id}: non-finite correlation for "
            f"channel pair ({bad[0]}, {bad[1]})"
        )
    return gram


def accumulate(gram: np.ndarray) -> np.ndarray:
    """Row sums of a square correlation matrix: one scalar per feature map."""
    gram = np.asarray(gram, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {gram.shape}")
    return gram.sum(axis=1)


def normalize(raw: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant vector maps to all zeros.

    A constant correlation profile carries no deviation information, so the
    degenerate max == min case yields zeros instead of NaN.
    """
    raw = np.asarray(raw, dtype=np.float64)
    low = raw.min()
    span = raw.max() - low
    if span == 0.0:
        return np.zeros_like(raw)
    return (raw - low) / span


def summarize_layer(record: ActivationRecord) -> GramSummary:
    raw = accumulate(gram_matrix(record))
    return GramSummary(record.layer_id, raw, normalize(raw))


def summarize_sample(sample: SampleActivations) -> list[GramSummary]:
    """Per-layer Gram summaries, in layer order."""
    return [summarize_layer(record) for record in sample.records]
