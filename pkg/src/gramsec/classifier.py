"""Deviation scoring and minimum-deviation classification.

A sample's per-layer Gram summary is compared channel by channel against
the [lower, upper] correlation range calibrated for a class; values inside
the range cost nothing, values outside pay a penalty relative to the
violated bound. Per-layer penalties, normalized by the class's expected
validation deviation, sum to a per-class total; the predicted class is the
one with the smallest total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibration import CalibrationModel, ClassLayerStats
from .gram import GramSummary, summarize_sample
from .interchange import ManifestEntry, SampleActivations, read_activations

# Bound denominators can be exactly 0 after min-max rescaling (the
# per-sample minimum maps to 0); the guard keeps penalties finite.
DENOM_FLOOR = 1e-12


@dataclass(eq=False)
class DeviationVector:
    """Per-class total deviations for one sample, plus the argmin class."""

    sample_id: str
    totals: np.ndarray  # shape (C,), non-negative
    predicted_class: int
    # contributions[c, i] = normalized deviation of selected layer i under
    # class c; rows sum to totals. Kept for per-layer diagnostics.
    contributions: np.ndarray | None = None


def delta(lower: float, upper: float, value: float) -> float:
    """Piecewise out-of-range penalty for a single correlation value.

    Zero inside [lower, upper]; outside, the overshoot is scaled by the
    magnitude of the violated bound (floored at DENOM_FLOOR).
    """
    if lower > upper:
        raise ValueError(f"invalid bounds: lower {lower} > upper {upper}")
    if lower <= value <= upper:
        return 0.0
    if value < lower:
        return (lower - value) / max(abs(lower), DENOM_FLOOR)
    return (value - upper) / max(abs(upper), DENOM_FLOOR)


def layer_deviation(summary: GramSummary, stats: ClassLayerStats) -> float:
    """Sum of per-channel penalties of one layer against one class's bounds."""
    if summary.channels != stats.lower.size:
        raise ValueError(
            f"layer {summary.layer_id}: summary has {summary.channels} channels, "
            f"class {stats.label} stats expect {stats.lower.size}"
        )
    values = summary.normalized
    below = np.maximum(stats.lower - values, 0.0)
    below /= np.maximum(np.abs(stats.lower), DENOM_FLOOR)
    above = np.maximum(values - stats.upper, 0.0)
    above /= np.maximum(np.abs(stats.upper), DENOM_FLOOR)
    return float(np.sum(below) + np.sum(above))


def total_deviation(
    summaries: Sequence[GramSummary], label: int, model: CalibrationModel
) -> float:
    """Expected-deviation-normalized penalty over the model's selected layers."""
    by_layer = {s.layer_id: s for s in summaries}
    total = 0.0
    for layer_id in model.selected_layers:
        if layer_id not in by_layer:
            raise ValueError(f"sample is missing selected layer {layer_id}")
        stats = model.stats_for(label, layer_id)
        total += layer_deviation(by_layer[layer_id], stats) / stats.expected_dev
    return total


def predict(sample: SampleActivations, model: CalibrationModel) -> DeviationVector:
    """Classify one sample by minimum total deviation (ties to lowest class)."""
    _check_shapes(sample, model)
    summaries = summarize_sample(sample)
    by_layer = {s.layer_id: s for s in summaries}

    selected = model.selected_layers
    contributions = np.zeros((model.num_classes, len(selected)))
    for label in range(model.num_classes):
        for i, layer_id in enumerate(selected):
            stats = model.stats_for(label, layer_id)
            contributions[label, i] = (
                layer_deviation(by_layer[layer_id], stats) / stats.expected_dev
            )
    totals = contributions.sum(axis=1)
    return DeviationVector(
        sample_id=sample.sample_id,
        totals=totals,
        predicted_class=int(np.argmin(totals)),
        contributions=contributions,
    )


def _check_shapes(sample: SampleActivations, model: CalibrationModel) -> None:
    sample_ids = tuple(r.layer_id for r in sample.records)
    if sample_ids != model.layer_ids:
        raise ValueError(
            f"sample {sample.sample_id!r} has layers {sample_ids}, "
            f"model was fitted on {model.layer_ids}"
        )
    for record in sample.records:
        expected_k = model.stats_for(0, record.layer_id).lower.size
        if record.channels != expected_k:
            raise ValueError(
                f"layer {record.layer_id}: expected K={expected_k}, got "
                f"K={record.channels} (m={record.height}, n={record.width})"
            )


@dataclass
class EvaluationReport:
    """Test-split metrics: accuracy, balanced accuracy, confusion counts."""

    accuracy: float
    balanced_accuracy: float
    confusion: np.ndarray  # confusion[i, j] = true class i predicted as j
    predictions: list[DeviationVector]


def summarize_confusion(confusion: np.ndarray) -> tuple[float, float]:
    """(accuracy, balanced accuracy) from a confusion-count matrix.

    Balanced accuracy averages per-class recall over the classes that
    actually appear (rows with at least one sample).
    """
    total = int(confusion.sum())
    if total == 0:
        raise ValueError("confusion matrix has no samples")
    correct = int(np.trace(confusion))
    class_counts = confusion.sum(axis=1)
    present = class_counts > 0
    recalls = np.diag(confusion)[present] / class_counts[present]
    return correct / total, float(recalls.mean())


def evaluate(
    entries: Sequence[ManifestEntry], model: CalibrationModel
) -> EvaluationReport:
    """Predict every entry and compute accuracy / balanced accuracy."""
    if not entries:
        raise ValueError("cannot evaluate an empty entry list")
    confusion = np.zeros((model.num_classes, model.num_classes), dtype=np.int64)
    predictions = []
    for entry in entries:
        sample = read_activations(entry.path, sample_id=entry.sample_id)
        result = predict(sample, model)
        predictions.append(result)
        confusion[entry.label, result.predicted_class] += 1

    accuracy, balanced = summarize_confusion(confusion)
    return EvaluationReport(
        accuracy=accuracy,
        balanced_accuracy=balanced,
        confusion=confusion,
        predictions=predictions,
    )
