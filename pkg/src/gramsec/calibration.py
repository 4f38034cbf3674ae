"""Per-class deviation calibration and Wasserstein-based layer selection.

Calibration fits, for every (class, layer, channel), the min/max range of
normalized Gram correlations seen on that class's training samples, then
estimates each class's expected per-layer deviation on the validation
split. Layers are ranked by how well their deviation values separate each
class from the rest (1-Wasserstein distance between the two empirical
distributions) and the top scorers are kept for inference.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gram import GramSummary
from .interchange import (
    FormatError,
    MagicError,
    TruncationError,
    VersionError,
)

MODEL_MAGIC = b"GRMM"
MODEL_VERSION = 1

# Keeps total-deviation denominators positive when a class's validation
# deviations are all zero (reachable with tiny datasets).
EXPECTED_DEV_FLOOR = 1e-12


@dataclass(eq=False)
class ClassLayerStats:
    """Calibrated statistics of one (class, layer) pair."""

    label: int
    layer_id: int
    lower: np.ndarray  # per-channel minima over the class's training samples
    upper: np.ndarray  # per-channel maxima
    expected_dev: float  # mean validation deviation for the class, floored

    def validate(self):
        if self.lower.shape != self.upper.shape:
            raise ValueError(
                f"class {self.label} layer {self.layer_id}: bound shape mismatch"
            )
        if np.any(self.lower > self.upper):
            raise ValueError(
                f"class {self.label} layer {self.layer_id}: lower bound exceeds upper"
            )
        if not self.expected_dev >= EXPECTED_DEV_FLOOR:
            raise ValueError(
                f"class {self.label} layer {self.layer_id}: "
                f"expected_dev {self.expected_dev} below floor"
            )


@dataclass(eq=False)
class LayerScore:
    """Class-separation score of one layer."""

    layer_id: int
    per_class: np.ndarray  # Wasserstein distance per class, shape (C,)
    aggregate: float  # unweighted mean over classes


@dataclass(eq=False)
class CalibrationModel:
    """Everything inference needs: bounds, expectations, selected layers."""

    num_classes: int
    layer_ids: tuple[int, ...]
    top_k: int
    selected_layers: tuple[int, ...]
    stats: dict[tuple[int, int], ClassLayerStats]  # keyed by (label, layer_id)
    layer_scores: list[LayerScore]

    def stats_for(self, label: int, layer_id: int) -> ClassLayerStats:
        return self.stats[(label, layer_id)]

    def validate(self):
        if not self.selected_layers:
            raise ValueError("model has no selected layers")
        if not set(self.selected_layers) <= set(self.layer_ids):
            raise ValueError(
                f"selected layers {self.selected_layers} not a subset "
                f"of {self.layer_ids}"
            )
        for label in range(self.num_classes):
            for layer_id in self.layer_ids:
                if (label, layer_id) not in self.stats:
                    raise ValueError(f"missing stats for class {label} layer {layer_id}")
                self.stats[(label, layer_id)].validate()


def _layout(summaries: Sequence[GramSummary]) -> tuple[tuple[int, int], ...]:
    return tuple((s.layer_id, s.channels) for s in summaries)


def fit_bounds(
    samples: Iterable[tuple[Sequence[GramSummary], int]], num_classes: int
) -> dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]:
    """Per-(class, layer) channel-wise min/max of normalized correlations.

    Single streaming pass; the reduction is order- and chunking-invariant.
    Returns {(label, layer_id): (lower, upper)}.
    """
    bounds: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    seen = np.zeros(num_classes, dtype=bool)
    layout = None
    for summaries, label in samples:
        if not 0 <= label < num_classes:
            raise ValueError(f"label {label} outside [0, {num_classes - 1}]")
        if layout is None:
            layout = _layout(summaries)
        elif _layout(summaries) != layout:
            raise ValueError(
                f"heterogeneous layer structure: {_layout(summaries)} vs {layout}"
            )
        seen[label] = True
        for summary in summaries:
            key = (label, summary.layer_id)
            if key in bounds:
                lower, upper = bounds[key]
                np.minimum(lower, summary.normalized, out=lower)
                np.maximum(upper, summary.normalized, out=upper)
            else:
                bounds[key] = (
                    summary.normalized.copy(),
                    summary.normalized.copy(),
                )
    missing = np.flatnonzero(~seen)
    if missing.size:
        raise ValueError(f"no training samples for class(es) {missing.tolist()}")
    return bounds


def _deviations_against(
    summaries: Sequence[GramSummary],
    bounds: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]],
    label: int,
) -> dict[int, float]:
    # Imported here: classifier depends on this module for its types.
    from .classifier import layer_deviation

    result = {}
    for summary in summaries:
        lower, upper = bounds[(label, summary.layer_id)]
        stats = ClassLayerStats(label, summary.layer_id, lower, upper, 1.0)
        result[summary.layer_id] = layer_deviation(summary, stats)
    return result


def fit_expected_devs(
    samples: Iterable[tuple[Sequence[GramSummary], int]],
    bounds: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]],
    num_classes: int,
) -> dict[tuple[int, int], float]:
    """Mean validation deviation per (class, layer), against own-class bounds."""
    sums: dict[tuple[int, int], float] = {}
    counts = np.zeros(num_classes, dtype=np.int64)
    for summaries, label in samples:
        counts[label] += 1
        for layer_id, dev in _deviations_against(summaries, bounds, label).items():
            key = (label, layer_id)
            sums[key] = sums.get(key, 0.0) + dev
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"no validation samples for class(es) {missing.tolist()}")
    return {
        (label, layer_id): max(total / counts[label], EXPECTED_DEV_FLOOR)
        for (label, layer_id), total in sums.items()
    }


def wasserstein_1d(a, b) -> float:
    """Exact 1-Wasserstein distance between two empirical distributions.

    Computed as the integral of the absolute CDF difference over the merged
    sorted support; multiset sizes need not match.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample multiset")
    merged = np.sort(np.concatenate([a, b]))
    gaps = np.diff(merged)
    cdf_a = np.searchsorted(a, merged[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, merged[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * gaps))


def score_layers(
    samples: Iterable[tuple[Sequence[GramSummary], int]],
    bounds: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]],
    num_classes: int,
) -> list[LayerScore]:
    """Rank layers by how well deviations separate each class from the rest.

    For every class, all samples are scored against that class's bounds and
    the own-class / other-class deviation distributions are compared with
    the 1-Wasserstein distance; a layer's aggregate is the unweighted mean
    over classes. With a single class there is no counter-distribution and
    every score is zero.
    """
    materialized = [(list(summaries), label) for summaries, label in samples]
    if not materialized:
        raise ValueError("no samples to score layers on")
    layer_ids = [s.layer_id for s in materialized[0][0]]

    labels = np.array([label for _, label in materialized])
    scores = []
    for layer_id in layer_ids:
        per_class = np.zeros(num_classes)
        for label in range(num_classes):
            devs = np.array(
                [
                    _deviations_against(summaries, bounds, label)[layer_id]
                    for summaries, _ in materialized
                ]
            )
            own = devs[labels == label]
            other = devs[labels != label]
            if own.size and other.size:
                per_class[label] = wasserstein_1d(own, other)
        scores.append(
            LayerScore(layer_id, per_class, aggregate=float(per_class.mean()))
        )
    return scores


def select_layers(scores: Sequence[LayerScore], top_k: int) -> tuple[int, ...]:
    """Ids of the top_k layers by aggregate score, ascending.

    Ties break toward the lower layer index.
    """
    if not 1 <= top_k <= len(scores):
        raise ValueError(f"top_k must be in [1, {len(scores)}], got {top_k}")
    ranked = sorted(scores, key=lambda s: (-s.aggregate, s.layer_id))
    return tuple(sorted(s.layer_id for s in ranked[:top_k]))


def default_top_k(num_layers: int) -> int:
    """Half the layers, rounded up."""
    return math.ceil(num_layers / 2)


def calibrate(
    train: Iterable[tuple[Sequence[GramSummary], int]],
    validation: Iterable[tuple[Sequence[GramSummary], int]],
    num_classes: int,
    top_k: int | None = None,
) -> CalibrationModel:
    """Full offline calibration: bounds, expectations, layer selection."""
    validation = [(list(summaries), label) for summaries, label in validation]
    bounds = fit_bounds(train, num_classes)
    expected = fit_expected_devs(validation, bounds, num_classes)
    scores = score_layers(validation, bounds, num_classes)

    layer_ids = tuple(score.layer_id for score in scores)
    if top_k is None:
        top_k = default_top_k(len(layer_ids))
    selected = select_layers(scores, top_k)

    stats = {
        (label, layer_id): ClassLayerStats(
            label,
            layer_id,
            bounds[(label, layer_id)][0],
            bounds[(label, layer_id)][1],
            expected[(label, layer_id)],
        )
        for label in range(num_classes)
        for layer_id in layer_ids
    }
    model = CalibrationModel(
        num_classes=num_classes,
        layer_ids=layer_ids,
        top_k=top_k,
        selected_layers=selected,
        stats=stats,
        layer_scores=scores,
    )
    model.validate()
    return model


def save_model(model: CalibrationModel, destination) -> int:
    """Serialize a calibration model. Returns bytes written.

    Layout (little-endian): magic "GRMM", version u32, C u32, L u32,
    top_k u32, top_k selected layer ids u32, L layer ids u32, then per
    (class, layer) class-major: K u32, K lower f64, K upper f64,
    expected_dev f64, then per layer: C per-class distances f64 and the
    aggregate score f64.
    """
    model.validate()
    if hasattr(destination, "write"):
        return _write_model(model, destination)
    with open(destination, "wb") as sink:
        return _write_model(model, sink)


def _write_model(model: CalibrationModel, sink) -> int:
    count = sink.write(MODEL_MAGIC)
    count += sink.write(
        struct.pack(
            "<IIII",
            MODEL_VERSION,
            model.num_classes,
            len(model.layer_ids),
            model.top_k,
        )
    )
    count += sink.write(
        struct.pack(f"<{len(model.selected_layers)}I", *model.selected_layers)
    )
    count += sink.write(struct.pack(f"<{len(model.layer_ids)}I", *model.layer_ids))
    for label in range(model.num_classes):
        for layer_id in model.layer_ids:
            stats = model.stats_for(label, layer_id)
            k = stats.lower.size
            count += sink.write(struct.pack("<I", k))
            count += sink.write(stats.lower.astype("<f8").tobytes())
            count += sink.write(stats.upper.astype("<f8").tobytes())
            count += sink.write(struct.pack("<d", stats.expected_dev))
    for score in model.layer_scores:
        count += sink.write(score.per_class.astype("<f8").tobytes())
        count += sink.write(struct.pack("<d", score.aggregate))
    return count


def load_model(source) -> CalibrationModel:
    """Parse and validate a serialized calibration model."""
    if hasattr(source, "read"):
        return _read_model(source)
    with open(source, "rb") as stream:
        return _read_model(stream)


def _read_exact(stream, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise TruncationError(f"{what}: expected {size} bytes, got {len(data)}")
    return data


def _read_model(stream) -> CalibrationModel:
    magic = stream.read(len(MODEL_MAGIC))
    if magic != MODEL_MAGIC:
        raise MagicError(f"bad model magic {magic!r}, expected {MODEL_MAGIC!r}")
    version, num_classes, num_layers, top_k = struct.unpack(
        "<IIII", _read_exact(stream, 16, "model header")
    )
    if version != MODEL_VERSION:
        raise VersionError(f"unsupported model version {version}")
    if num_classes < 1 or num_layers < 1 or not 1 <= top_k <= num_layers:
        raise FormatError(
            f"inconsistent model header: C={num_classes} L={num_layers} top_k={top_k}"
        )
    selected = struct.unpack(
        f"<{top_k}I", _read_exact(stream, 4 * top_k, "selected layers")
    )
    layer_ids = struct.unpack(
        f"<{num_layers}I", _read_exact(stream, 4 * num_layers, "layer id table")
    )

    stats = {}
    for label in range(num_classes):
        for layer_id in layer_ids:
            what = f"stats for class {label} layer {layer_id}"
            (k,) = struct.unpack("<I", _read_exact(stream, 4, what))
            lower = np.frombuffer(_read_exact(stream, 8 * k, what), dtype="<f8")
            upper = np.frombuffer(_read_exact(stream, 8 * k, what), dtype="<f8")
            (expected_dev,) = struct.unpack("<d", _read_exact(stream, 8, what))
            stats[(label, layer_id)] = ClassLayerStats(
                label, layer_id, lower.copy(), upper.copy(), expected_dev
            )

    layer_scores = []
    for layer_id in layer_ids:
        what = f"scores for layer {layer_id}"
        per_class = np.frombuffer(
            _read_exact(stream, 8 * num_classes, what), dtype="<f8"
        )
        (aggregate,) = struct.unpack("<d", _read_exact(stream, 8, what))
        layer_scores.append(LayerScore(layer_id, per_class.copy(), aggregate))

    model = CalibrationModel(
        num_classes=num_classes,
        layer_ids=tuple(layer_ids),
        top_k=top_k,
        selected_layers=tuple(selected),
        stats=stats,
        layer_scores=layer_scores,
    )
    try:
        model.validate()
    except ValueError as exc:
        raise FormatError(f"model failed validation on load: {exc}") from exc
    return model
