"""Binary activation-tensor format and dataset manifest.

Everything downstream (summaries, calibration, classification) consumes
activations through this module, so the classifier never needs to know
which framework produced the feature maps.

Activation file layout (all integers unsigned 32-bit little-endian):

    magic "GRAM" | version=1 | layer count L |
    per layer: layer_id, K, m, n, then K*m*n float32 LE values
    (channel-major, then row, then column)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC = b"GRAM"
FORMAT_VERSION = 1

SPLITS = ("train", "validation", "test")

_HEADER = struct.Struct("<4sII")  # magic, version, layer count
_LAYER_HEADER = struct.Struct("<IIII")  # layer_id, K, m, n


class FormatError(ValueError):
    """Base class for malformed activation streams."""


class MagicError(FormatError):
    """Stream does not start with the activation-file magic."""


class VersionError(FormatError):
    """Recognized magic but unsupported format version."""


class TruncationError(FormatError):
    """Stream ended before the declared payload was complete."""


class NonFiniteValueError(FormatError):
    """NaN or Inf encountered where only finite values are admitted."""


class RecordInvariantError(ValueError):
    """An activation record violates its structural invariants."""


class ManifestError(ValueError):
    """Dataset manifest is malformed or violates coverage invariants."""


@dataclass(eq=False)
class ActivationRecord:
    """One layer's feature maps for one sample: K maps of m*n values."""

    layer_id: int
    channels: int
    height: int
    width: int
    values: np.ndarray  # shape (K, m*n), float32

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        expected = self.channels * self.height * self.width
        if values.size != expected:
            raise RecordInvariantError(
                f"layer {self.layer_id}: expected {expected} values "
                f"(K={self.channels}, m={self.height}, n={self.width}), got {values.size}"
            )
        self.values = values.reshape(self.channels, self.height * self.width)

    def validate(self):
        if min(self.channels, self.height, self.width) < 1:
            raise RecordInvariantError(
                f"layer {self.layer_id}: K, m, n must all be >= 1, "
                f"got ({self.channels}, {self.height}, {self.width})"
            )
        if not np.all(np.isfinite(self.values)):
            raise RecordInvariantError(
                f"layer {self.layer_id}: non-finite activation values"
            )

    def maps(self) -> np.ndarray:
        """Feature maps as a (K, m, n) view."""
        return self.values.reshape(self.channels, self.height, self.width)

    def __eq__(self, other):
        if not isinstance(other, ActivationRecord):
            return NotImplemented
        return (
            self.layer_id == other.layer_id
            and self.channels == other.channels
            and self.height == other.height
            and self.width == other.width
            and np.array_equal(self.values, other.values)
        )


@dataclass(eq=False)
class SampleActivations:
    """All assessed layers of one sample, in layer order."""

    sample_id: str
    records: list[ActivationRecord]

    def validate(self):
        if not self.records:
            raise RecordInvariantError(f"sample {self.sample_id!r}: no layers")
        ids = [r.layer_id for r in self.records]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise RecordInvariantError(
                f"sample {self.sample_id!r}: layer ids must be strictly increasing, got {ids}"
            )
        for record in self.records:
            record.validate()

    def layout(self) -> tuple[tuple[int, int, int, int], ...]:
        """Per-layer (layer_id, K, m, n); must match across a dataset."""
        return tuple(
            (r.layer_id, r.channels, r.height, r.width) for r in self.records
        )

    def __eq__(self, other):
        if not isinstance(other, SampleActivations):
            return NotImplemented
        return self.sample_id == other.sample_id and self.records == other.records


def write_activations(sample: SampleActivations, destination) -> int:
    """Serialize a sample to a binary sink or path. Returns bytes written.

    The sample is validated up front; nothing is written on rejection.
    """
    sample.validate()
    if hasattr(destination, "write"):
        return _write_stream(sample, destination)
    with open(destination, "wb") as sink:
        return _write_stream(sample, sink)


def _write_stream(sample: SampleActivations, sink: BinaryIO) -> int:
    count = sink.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(sample.records)))
    for record in sample.records:
        count += sink.write(
            _LAYER_HEADER.pack(
                record.layer_id, record.channels, record.height, record.width
            )
        )
        payload = np.ascontiguousarray(record.values, dtype="<f4").tobytes()
        count += sink.write(payload)
    return count


def read_activations(source, sample_id: str = "") -> SampleActivations:
    """Parse one activation file from a binary source or path.

    The on-disk format carries no sample identity; callers that know it
    (e.g. the manifest loader) pass it in.
    """
    if hasattr(source, "read"):
        return _read_stream(source, sample_id)
    with open(source, "rb") as stream:
        return _read_stream(stream, sample_id)


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise TruncationError(f"{what}: expected {size} bytes, got {len(data)}")
    return data


def _read_stream(stream: BinaryIO, sample_id: str) -> SampleActivations:
    magic = stream.read(len(MAGIC))
    if magic != MAGIC:
        raise MagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, layer_count = struct.unpack("<II", _read_exact(stream, 8, "file header"))
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}")

    records = []
    for index in range(layer_count):
        header = _read_exact(stream, _LAYER_HEADER.size, f"layer {index} header")
        layer_id, channels, height, width = _LAYER_HEADER.unpack(header)
        if min(channels, height, width) < 1:
            raise FormatError(
                f"layer {layer_id}: K, m, n must all be >= 1, "
                f"got ({channels}, {height}, {width})"
            )
        payload = _read_exact(
            stream, channels * height * width * 4, f"layer {layer_id} payload"
        )
        values = np.frombuffer(payload, dtype="<f4").reshape(channels, height * width)
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError(f"layer {layer_id}: non-finite value in payload")
        records.append(
            ActivationRecord(layer_id, channels, height, width, values.copy())
        )

    sample = SampleActivations(sample_id, records)
    sample.validate()
    return sample


def probe_layout(path) -> tuple[tuple[int, int, int, int], ...]:
    """Read per-layer (layer_id, K, m, n) headers without loading payloads."""
    with open(path, "rb") as stream:
        magic = stream.read(len(MAGIC))
        if magic != MAGIC:
            raise MagicError(f"{path}: bad magic {magic!r}")
        version, layer_count = struct.unpack(
            "<II", _read_exact(stream, 8, "file header")
        )
        if version != FORMAT_VERSION:
            raise VersionError(f"{path}: unsupported format version {version}")
        layout = []
        for index in range(layer_count):
            header = _read_exact(stream, _LAYER_HEADER.size, f"layer {index} header")
            layer_id, channels, height, width = _LAYER_HEADER.unpack(header)
            layout.append((layer_id, channels, height, width))
            stream.seek(channels * height * width * 4, 1)
    return tuple(layout)


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    split: str
    label: int
    path: Path


@dataclass
class DatasetManifest:
    """Sample ids, split assignments, class labels, and activation paths."""

    num_classes: int
    entries: list[ManifestEntry] = field(default_factory=list)

    def split(self, name: str) -> list[ManifestEntry]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}, expected one of {SPLITS}")
        return [e for e in self.entries if e.split == name]


def load_manifest(path, probe_layers: bool = True) -> DatasetManifest:
    """Load and validate a JSON dataset manifest.

    Relative activation paths resolve against the manifest's directory.
    With ``probe_layers`` the header of every referenced file is checked
    for an identical layer structure, since per-channel statistics are
    undefined across heterogeneous shapes.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: not valid JSON: {exc}") from exc

    if not isinstance(raw, dict) or "num_classes" not in raw or "entries" not in raw:
        raise ManifestError(f"{path}: expected object with 'num_classes' and 'entries'")
    num_classes = raw["num_classes"]
    if not isinstance(num_classes, int) or num_classes < 1:
        raise ManifestError(f"{path}: num_classes must be a positive integer")

    entries = []
    seen_ids = set()
    for index, item in enumerate(raw["entries"]):
        try:
            sample_id = item["id"]
            split = item["split"]
            label = item["label"]
            entry_path = item["path"]
        except (TypeError, KeyError) as exc:
            raise ManifestError(f"entry {index}: missing field {exc}") from exc
        if split not in SPLITS:
            raise ManifestError(
                f"entry {index} ({sample_id!r}): unknown split {split!r}"
            )
        if not isinstance(label, int) or not 0 <= label < num_classes:
            raise ManifestError(
                f"entry {index} ({sample_id!r}): label {label!r} outside [0, {num_classes - 1}]"
            )
        if sample_id in seen_ids:
            raise ManifestError(f"entry {index}: duplicate sample id {sample_id!r}")
        seen_ids.add(sample_id)
        resolved = Path(entry_path)
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        entries.append(ManifestEntry(sample_id, split, label, resolved))

    for label in range(num_classes):
        for split in ("train", "validation"):
            if not any(e.label == label and e.split == split for e in entries):
                raise ManifestError(
                    f"class {label} has no {split} entries; "
                    "every class needs at least one"
                )

    manifest = DatasetManifest(num_classes, entries)
    if probe_layers:
        verify_layer_homogeneity(manifest)
    return manifest


def verify_layer_homogeneity(manifest: DatasetManifest) -> tuple:
    """Probe every referenced file and require one shared layer layout."""
    reference = None
    reference_entry = None
    for entry in manifest.entries:
        layout = probe_layout(entry.path)
        if reference is None:
            reference, reference_entry = layout, entry
        elif layout != reference:
            raise ManifestError(
                f"heterogeneous layer structure: {entry.sample_id!r} has {layout}, "
                f"{reference_entry.sample_id!r} has {reference}"
            )
    return reference


def save_manifest(manifest: DatasetManifest, path, relative_to=None) -> None:
    """Write a manifest as deterministic UTF-8 JSON."""
    payload = {
        "num_classes": manifest.num_classes,
        "entries": [
            {
                "id": e.sample_id,
                "split": e.split,
                "label": e.label,
                "path": str(
                    e.path.relative_to(relative_to) if relative_to else e.path
                ),
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
