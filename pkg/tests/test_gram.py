"""Gram-matrix summaries against hand values and a brute-force oracle."""

import numpy as np
import pytest

from gramsec.gram import (
    accumulate,
    gram_matrix,
    normalize,
    summarize_sample,
)
from gramsec.interchange import ActivationRecord, SampleActivations


def record_from(matrix, layer_id=0):
    matrix = np.asarray(matrix, dtype=np.float32)
    k, size = matrix.shape
    return ActivationRecord(layer_id, k, 1, size, matrix)


def brute_force_summary(record):
    """O(K^2 * mn) reference: explicit pairwise dot products, scalar loops."""
    maps = record.values.astype(np.float64)
    k = record.channels
    raw = np.zeros(k)
    for a in range(k):
        for b in range(k):
            dot = 0.0
            for i in range(maps.shape[1]):
                dot += maps[a, i] * maps[b, i]
            raw[a] += dot
    low, high = raw.min(), raw.max()
    norm = np.zeros(k) if high == low else (raw - low) / (high - low)
    return raw, norm


def random_record(rng, layer_id=0, max_channels=8, max_pixels=64):
    k = int(rng.integers(1, max_channels + 1))
    m = int(rng.integers(1, 9))
    n = int(rng.integers(1, max_pixels // m + 1))
    values = rng.standard_normal((k, m * n)).astype(np.float32) * 3.0
    return ActivationRecord(layer_id, k, m, n, values)


def min_eigenvalue_estimate(matrix, iterations=200):
    """Smallest eigenvalue via shifted power iteration (test-side oracle)."""
    rng = np.random.default_rng(0)

    def dominant(mat):
        vec = rng.standard_normal(mat.shape[0])
        for _ in range(iterations):
            vec = mat @ vec
            norm = np.linalg.norm(vec)
            if norm == 0:
                return 0.0
            vec /= norm
        return float(vec @ mat @ vec)

    top = dominant(matrix)
    shift = abs(top) + 1.0
    return shift - dominant(shift * np.eye(matrix.shape[0]) - matrix)


def test_identity_rows():
    assert np.array_equal(gram_matrix(record_from(np.eye(2))), np.eye(2))


def test_hand_multiplied_example():
    gram = gram_matrix(record_from([[1, 2], [3, 4]]))
    assert np.array_equal(gram, [[5, 11], [11, 25]])
    assert np.array_equal(accumulate(gram), [16, 36])


def test_zero_row_zeroes_its_cross_terms():
    gram = gram_matrix(record_from([[0, 0], [3, 4], [1, 1]]))
    assert np.array_equal(gram[0], np.zeros(3))
    assert np.array_equal(gram[:, 0], np.zeros(3))


def test_accumulate_identity_and_symmetry():
    assert np.array_equal(accumulate(np.eye(2)), [1, 1])
    rng = np.random.default_rng(5)
    gram = gram_matrix(record_from(rng.standard_normal((4, 6))))
    assert np.array_equal(accumulate(gram), gram.sum(axis=0))  # == column sums


def test_accumulate_requires_square():
    with pytest.raises(ValueError, match="square"):
        accumulate(np.zeros((2, 3)))


def test_normalize_examples():
    assert np.allclose(normalize(np.array([16.0, 36.0])), [0.0, 1.0])
    assert np.array_equal(normalize(np.array([7.0, 7.0, 7.0])), [0.0, 0.0, 0.0])
    assert np.allclose(normalize(np.array([0.0, 5.0, 10.0])), [0.0, 0.5, 1.0])


def test_single_channel_summary_is_degenerate():
    sample = SampleActivations("s", [record_from([[1.0, 2.0]])])
    (summary,) = summarize_sample(sample)
    assert np.array_equal(summary.normalized, [0.0])


def test_zero_activations_summary():
    sample = SampleActivations("s", [record_from(np.zeros((3, 4)))])
    (summary,) = summarize_sample(sample)
    assert np.array_equal(summary.raw, np.zeros(3))
    assert np.array_equal(summary.normalized, np.zeros(3))


def test_three_layer_sample_matches_brute_force():
    rng = np.random.default_rng(11)
    records = [random_record(rng, layer_id=i) for i in range(3)]
    sample = SampleActivations("s", records)
    for summary, record in zip(summarize_sample(sample), records):
        raw, norm = brute_force_summary(record)
        assert np.allclose(summary.raw, raw, rtol=1e-9, atol=1e-12)
        assert np.allclose(summary.normalized, norm, rtol=1e-9, atol=1e-12)


def test_symmetry_is_exact():
    rng = np.random.default_rng(2)
    for _ in range(20):
        gram = gram_matrix(random_record(rng))
        assert np.array_equal(gram, gram.T)


def test_positive_semidefinite():
    rng = np.random.default_rng(3)
    for _ in range(20):
        gram = gram_matrix(random_record(rng))
        norm = np.linalg.norm(gram)
        assert min_eigenvalue_estimate(gram) >= -1e-6 * max(norm, 1.0)


def test_scale_covariance():
    rng = np.random.default_rng(4)
    for _ in range(10):
        record = random_record(rng)
        scaled = ActivationRecord(
            record.layer_id,
            record.channels,
            record.height,
            record.width,
            record.values * 2.0,
        )
        assert np.allclose(
            gram_matrix(scaled), 4.0 * gram_matrix(record), rtol=1e-9, atol=1e-12
        )
        # rescaled summaries are invariant under positive scaling of raw
        raw = accumulate(gram_matrix(record))
        assert np.allclose(
            normalize(raw * 7.5), normalize(raw), rtol=1e-9, atol=1e-12
        )


def test_accumulate_equals_ones_matvec():
    rng = np.random.default_rng(6)
    gram = gram_matrix(random_record(rng))
    ones = np.ones(gram.shape[0])
    assert np.allclose(accumulate(gram), gram @ ones, rtol=1e-9, atol=1e-12)
