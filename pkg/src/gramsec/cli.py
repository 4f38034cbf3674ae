"""Command-line interface.

Subcommands mirror the pipeline: spectrogram -> refnet -> summarize for
single files, synth / fit / predict / eval / run for dataset-level work.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from .calibration import calibrate, load_model, save_model
from .classifier import evaluate, predict
from .gram import summarize_sample
from .harness import ExperimentConfig, generate_synthetic, run_experiment
from .interchange import (
    ActivationRecord,
    SampleActivations,
    load_manifest,
    read_activations,
    write_activations,
)
from .refnet import RefNetConfig, forward


def _cmd_spectrogram(args) -> int:
    segment = audio_mod.load_wav(args.infile)
    mel = audio_mod.mel_spectrogram(segment)
    record = ActivationRecord(
        layer_id=0,
        channels=1,
        height=mel.bands,
        width=mel.frames,
        values=mel.values.reshape(1, -1).astype(np.float32),
    )
    sample = SampleActivations(Path(args.infile).stem, [record])
    write_activations(sample, args.outfile)
    print(f"wrote {mel.bands}x{mel.frames} mel spectrogram to {args.outfile}")
    return 0


def _read_spectrogram(path) -> audio_mod.MelSpectrogram:
    sample = read_activations(path)
    if len(sample.records) != 1 or sample.records[0].channels != 1:
        raise ValueError(f"{path}: expected a single-layer, single-channel file")
    return audio_mod.MelSpectrogram(sample.records[0].maps()[0].astype(np.float64))


def _cmd_refnet(args) -> int:
    spec = _read_spectrogram(args.infile)
    config = RefNetConfig(seed=args.seed, band_filter_mode=args.band_filters)
    sample = forward(spec, config)
    sample.sample_id = Path(args.infile).stem
    write_activations(sample, args.outfile)
    print(f"wrote {len(sample.records)} layers to {args.outfile}")
    return 0


def _cmd_summarize(args) -> int:
    sample = read_activations(args.infile, sample_id=Path(args.infile).stem)
    records = []
    for summary in summarize_sample(sample):
        # row 0: raw accumulated correlations, row 1: min-max rescaled
        stacked = np.stack([summary.raw, summary.normalized]).astype(np.float32)
        records.append(
            ActivationRecord(
                layer_id=summary.layer_id,
                channels=2,
                height=1,
                width=summary.channels,
                values=stacked,
            )
        )
    write_activations(SampleActivations(sample.sample_id, records), args.outfile)
    print(f"wrote {len(records)} layer summaries to {args.outfile}")
    return 0


def _dataset_summaries(manifest, split):
    pairs = []
    for entry in manifest.split(split):
        sample = read_activations(entry.path, sample_id=entry.sample_id)
        pairs.append((summarize_sample(sample), entry.label))
    return pairs


def _cmd_fit(args) -> int:
    manifest = load_manifest(args.manifest)
    train = _dataset_summaries(manifest, "train")
    validation = _dataset_summaries(manifest, "validation")
    model = calibrate(train, validation, manifest.num_classes, args.top_k)
    save_model(model, args.outfile)
    scores = " ".join(
        f"{s.layer_id}:{s.aggregate:.4g}" for s in model.layer_scores
    )
    print(f"layer scores: {scores}")
    print(f"selected layers: {list(model.selected_layers)}")
    print(f"wrote model to {args.outfile}")
    return 0


def _cmd_predict(args) -> int:
    manifest = load_manifest(args.manifest)
    model = load_model(args.model)
    entries = manifest.entries if args.split == "all" else manifest.split(args.split)
    lines = [
        "sample_id,predicted_class,"
        + ",".join(f"delta_{c}" for c in range(model.num_classes))
    ]
    for entry in entries:
        sample = read_activations(entry.path, sample_id=entry.sample_id)
        result = predict(sample, model)
        totals = ",".join(repr(float(v)) for v in result.totals)
        lines.append(f"{result.sample_id},{result.predicted_class},{totals}")
    Path(args.outfile).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines) - 1} predictions to {args.outfile}")
    return 0


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    model = load_model(args.model)
    report = evaluate(manifest.split("test"), model)
    print(f"accuracy {report.accuracy:.4f}")
    print(f"balanced_accuracy {report.balanced_accuracy:.4f}")
    print("confusion_matrix (rows true, columns predicted):")
    for row in report.confusion.tolist():
        print("  " + " ".join(str(v) for v in row))
    return 0


def _cmd_synth(args) -> int:
    manifest = generate_synthetic(
        num_classes=args.classes,
        train=args.train,
        validation=args.val,
        test=args.test,
        seed=args.seed,
        out_dir=args.out,
        frames=args.frames,
    )
    print(f"wrote {len(manifest.entries)} activation files to {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config)
    print(f"accuracy {report.accuracy:.4f}")
    print(f"balanced_accuracy {report.balanced_accuracy:.4f}")
    print(f"selected layers: {list(report.model.selected_layers)}")
    print(f"artifacts in {report.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramsec",
        description="Gram-matrix deviation classifier over CNN activations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrogram", help="WAV file to 128-band mel spectrogram")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=_cmd_spectrogram)

    p = sub.add_parser("refnet", help="spectrogram to reference-net activations")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--band-filters", action="store_true")
    p.set_defaults(func=_cmd_refnet)

    p = sub.add_parser("summarize", help="activations to per-layer Gram summaries")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("fit", help="calibrate a model from a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="per-sample class deviations to CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument(
        "--split", choices=("train", "validation", "test", "all"), default="test"
    )
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="test-split accuracy and confusion matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic band-structured dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--train", type=int, default=10)
    p.add_argument("--val", type=int, default=5)
    p.add_argument("--test", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a one-line error, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
