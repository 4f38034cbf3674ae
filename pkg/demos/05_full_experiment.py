"""A complete synthetic experiment in a temporary directory.

Generates a 3-class band-structured dataset, calibrates the classifier,
and evaluates the held-out split. Same flow as:

    gramsec synth --classes 3 --train 10 --val 5 --test 5 --seed 7 --out data/
    gramsec run --config experiment.json
"""

import tempfile
from pathlib import Path

from gramsec import ExperimentConfig, generate_synthetic, run_experiment

with tempfile.TemporaryDirectory() as workdir:
    workdir = Path(workdir)
    generate_synthetic(
        num_classes=3, train=10, validation=5, test=5, seed=7,
        out_dir=workdir / "data",
    )
    report = run_experiment(
        ExperimentConfig(
            manifest=workdir / "data" / "manifest.json",
            out_dir=workdir / "results",
            seed=7,
        )
    )
    print(f"accuracy          {report.accuracy:.3f}")
    print(f"balanced accuracy {report.balanced_accuracy:.3f}")
    print(f"selected layers   {list(report.model.selected_layers)}")
    print("confusion matrix:")
    for row in report.confusion.tolist():
        print("  ", row)
    print("\nper-layer separation scores:")
    for score in report.model.layer_scores:
        print(f"  layer {score.layer_id}: {score.aggregate:.4g}")
