"""Gram-matrix deviation classifier over CNN layer activations.

Pipeline: audio -> mel spectrogram -> CNN activations -> per-layer Gram
correlation summaries -> per-class min/max calibration -> Wasserstein
layer selection -> minimum-total-deviation classification.
"""

from .audio import (
    AudioSegment,
    MelSpectrogram,
    load_wav,
    mel_filterbank,
    mel_project,
    mel_spectrogram,
    resample,
    stft_power,
)
from .calibration import (
    CalibrationModel,
    ClassLayerStats,
    LayerScore,
    calibrate,
    default_top_k,
    fit_bounds,
    fit_expected_devs,
    load_model,
    save_model,
    score_layers,
    select_layers,
    wasserstein_1d,
)
from .classifier import (
    DeviationVector,
    EvaluationReport,
    delta,
    evaluate,
    layer_deviation,
    predict,
    summarize_confusion,
    total_deviation,
)
from .gram import (
    GramSummary,
    accumulate,
    gram_matrix,
    normalize,
    summarize_layer,
    summarize_sample,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    generate_synthetic,
    run_experiment,
    synthetic_spectrogram,
)
from .interchange import (
    ActivationRecord,
    DatasetManifest,
    ManifestEntry,
    SampleActivations,
    load_manifest,
    probe_layout,
    read_activations,
    save_manifest,
    write_activations,
)
from .refnet import RefNetConfig, forward

__version__ = "0.1.0"

__all__ = [
    "ActivationRecord",
    "AudioSegment",
    "CalibrationModel",
    "ClassLayerStats",
    "DatasetManifest",
    "DeviationVector",
    "EvaluationReport",
    "ExperimentConfig",
    "ExperimentReport",
    "GramSummary",
    "LayerScore",
    "ManifestEntry",
    "MelSpectrogram",
    "RefNetConfig",
    "SampleActivations",
    "accumulate",
    "calibrate",
    "default_top_k",
    "delta",
    "evaluate",
    "fit_bounds",
    "fit_expected_devs",
    "forward",
    "generate_synthetic",
    "gram_matrix",
    "layer_deviation",
    "load_manifest",
    "load_model",
    "load_wav",
    "mel_filterbank",
    "mel_project",
    "mel_spectrogram",
    "normalize",
    "predict",
    "probe_layout",
    "read_activations",
    "resample",
    "run_experiment",
    "save_manifest",
    "save_model",
    "score_layers",
    "select_layers",
    "stft_power",
    "summarize_confusion",
    "summarize_layer",
    "summarize_sample",
    "synthetic_spectrogram",
    "total_deviation",
    "wasserstein_1d",
    "write_activations",
]
