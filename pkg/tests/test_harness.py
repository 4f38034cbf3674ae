"""Synthetic dataset generation and full experiment runs."""

import json

import numpy as np
import pytest

from gramsec.harness import (
    BASELINE_LEVEL,
    ExperimentConfig,
    StageError,
    generate_synthetic,
    run_experiment,
    synthetic_spectrogram,
)
from gramsec.interchange import load_manifest


def dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.is_file()}


def test_synthetic_counts(tmp_path):
    manifest = generate_synthetic(3, train=4, validation=2, test=2, seed=7, out_dir=tmp_path)
    files = list(tmp_path.glob("*.gram"))
    assert len(files) == 3 * (4 + 2 + 2)
    assert len(manifest.entries) == len(files)
    # manifest on disk is valid and homogeneous
    loaded = load_manifest(tmp_path / "manifest.json")
    assert loaded.num_classes == 3


def test_synthetic_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    generate_synthetic(2, 3, 2, 2, seed=11, out_dir=first)
    generate_synthetic(2, 3, 2, 2, seed=11, out_dir=second)
    assert dir_bytes(first) == dir_bytes(second)
    third = tmp_path / "c"
    generate_synthetic(2, 3, 2, 2, seed=12, out_dir=third)
    assert dir_bytes(first) != dir_bytes(third)


def test_band_energy_dominates():
    rng = np.random.default_rng(0)
    spec = synthetic_spectrogram(0, rng)
    band = spec.values[:16]
    rest = spec.values[16:]
    assert np.mean(band**2) >= 10 * np.mean(rest**2)
    assert BASELINE_LEVEL > 0


def test_too_many_classes(tmp_path):
    with pytest.raises(ValueError, match="disjoint"):
        generate_synthetic(9, 1, 1, 1, seed=0, out_dir=tmp_path)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    generate_synthetic(3, train=6, validation=4, test=4, seed=7, out_dir=out)
    return out


def test_run_experiment_report(small_dataset, tmp_path):
    config = ExperimentConfig(
        manifest=small_dataset / "manifest.json", out_dir=tmp_path / "out", seed=7
    )
    report = run_experiment(config)
    assert report.accuracy == 1.0
    assert report.balanced_accuracy == 1.0
    assert report.confusion.shape == (3, 3)
    for name in ("model.gram", "predictions.csv", "metrics.txt", "metrics.json", "run_log.txt"):
        assert (tmp_path / "out" / name).exists()
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert metrics["accuracy"] == 1.0
    assert len(metrics["layer_scores"]) == 3


def test_rerun_is_byte_identical(small_dataset, tmp_path):
    config_a = ExperimentConfig(
        manifest=small_dataset / "manifest.json", out_dir=tmp_path / "a", seed=7
    )
    config_b = ExperimentConfig(
        manifest=small_dataset / "manifest.json", out_dir=tmp_path / "b", seed=7
    )
    run_experiment(config_a)
    run_experiment(config_b)
    gated = ("model.gram", "predictions.csv", "metrics.txt", "metrics.json")
    for name in gated:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_top_one_selects_band_layer(small_dataset, tmp_path):
    config = ExperimentConfig(
        manifest=small_dataset / "manifest.json",
        out_dir=tmp_path / "out",
        top_k=1,
        seed=7,
    )
    report = run_experiment(config)
    assert report.model.selected_layers == (0,)
    assert report.accuracy == 1.0


def test_config_file_parsing(small_dataset, tmp_path):
    config_path = tmp_path / "exp.json"
    config_path.write_text(
        json.dumps(
            {
                "manifest": str(small_dataset / "manifest.json"),
                "out_dir": "results",
                "top_k": 2,
                "seed": 3,
                "activations": "external",
            }
        )
    )
    config = ExperimentConfig.from_file(config_path)
    assert config.top_k == 2
    assert config.refnet is None
    assert config.out_dir == tmp_path / "results"


def test_refnet_mode_from_spectrogram_files(tmp_path):
    # store raw surrogate spectrograms, let the runner forward them
    from gramsec.interchange import ActivationRecord, ManifestEntry, SampleActivations
    from gramsec.interchange import DatasetManifest, save_manifest, write_activations

    entries = []
    for label in range(2):
        for split, count in (("train", 3), ("validation", 2), ("test", 2)):
            for i in range(count):
                rng = np.random.default_rng([99, label, ("train", "validation", "test").index(split), i])
                spec = synthetic_spectrogram(label, rng)
                sample_id = f"c{label}_{split}_{i}"
                record = ActivationRecord(
                    0, 1, 128, spec.frames, spec.values.reshape(1, -1).astype(np.float32)
                )
                path = tmp_path / f"{sample_id}.gram"
                write_activations(SampleActivations(sample_id, [record]), path)
                entries.append(ManifestEntry(sample_id, split, label, path))
    save_manifest(DatasetManifest(2, entries), tmp_path / "manifest.json", relative_to=tmp_path)

    config_path = tmp_path / "exp.json"
    config_path.write_text(
        json.dumps(
            {
                "manifest": "manifest.json",
                "out_dir": "results",
                "seed": 7,
                "activations": {"band_filters": True, "seed": 7},
            }
        )
    )
    report = run_experiment(ExperimentConfig.from_file(config_path))
    assert report.accuracy == 1.0


def test_stage_error_names_stage(tmp_path):
    config = ExperimentConfig(manifest=tmp_path / "missing.json", out_dir=tmp_path / "out")
    with pytest.raises(StageError, match="stage 'load manifest' failed"):
        run_experiment(config)
