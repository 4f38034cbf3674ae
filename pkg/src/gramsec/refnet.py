"""Deterministic reference CNN for end-to-end pipeline testing.

A small untrained convolutional stack whose weights are a pure function of
(seed, block index), so activations are reproducible across platforms with
no ML framework. Each block is a 3x3 convolution (stride 1, zero padding
1, zero bias) followed by ReLU; activations are captured post-ReLU, and a
2x2 max-pool feeds the next block. In band-filter mode the first block is
replaced by hand-crafted band selectors: output channel c passes only the
rows of mel band c (16 rows each, weighted 1/16), which guarantees
class-separable correlation statistics by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import MelSpectrogram
from .interchange import ActivationRecord, SampleActivations

BAND_ROWS = 16

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RefNetConfig:
    num_blocks: int = 3
    channels: tuple[int, ...] = (8, 16, 32)
    seed: int = 0
    band_filter_mode: bool = False

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if len(self.channels) != self.num_blocks:
            raise ValueError(
                f"need {self.num_blocks} channel counts, got {len(self.channels)}"
            )
        if any(c < 1 for c in self.channels):
            raise ValueError("channel counts must all be >= 1")


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return state, z


def _uniform_weights(seed: int, block: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform weights in [-s, s], s = 1/sqrt(fan-in), from a pure PRNG."""
    fan_in = int(np.prod(shape[1:]))
    scale = 1.0 / np.sqrt(fan_in)
    # decorrelate the per-block streams before drawing
    state, _ = _splitmix64((seed ^ (block + 1)) & _MASK64)
    values = np.empty(int(np.prod(shape)))
    for i in range(values.size):
        state, z = _splitmix64(state)
        values[i] = (z / 2.0**64) * 2.0 - 1.0
    return (values * scale).reshape(shape)


def block_weights(config: RefNetConfig, block: int, in_channels: int) -> np.ndarray:
    """3x3 kernel stack for one block, shape (out, in, 3, 3)."""
    return _uniform_weights(
        config.seed, block, (config.channels[block], in_channels, 3, 3)
    )


def weight_checksum(config: RefNetConfig) -> float:
    """Sum of all kernel magnitudes; differs across seeds."""
    total = 0.0
    in_channels = 1
    for block in range(config.num_blocks):
        if block == 0 and config.band_filter_mode:
            in_channels = config.channels[0]
            continue
        total += float(np.abs(block_weights(config, block, in_channels)).sum())
        in_channels = config.channels[block]
    return total


def _conv3x3(image: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Stride-1, zero-padded 3x3 convolution: (Ci, H, W) -> (Co, H, W)."""
    padded = np.pad(image, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(1, 2))
    return np.einsum("ihwkl,oikl->ohw", windows, kernels)


def _max_pool2(image: np.ndarray) -> np.ndarray:
    channels, height, width = image.shape
    if height < 2 or width < 2:
        raise ValueError(
            f"feature map {height}x{width} is too small to pool; "
            "input spectrogram has too few rows or frames for this depth"
        )
    height -= height % 2
    width -= width % 2
    trimmed = image[:, :height, :width]
    halves = trimmed.reshape(channels, height // 2, 2, width // 2, 2)
    return halves.max(axis=(2, 4))


def _band_filter(spec: np.ndarray, num_channels: int) -> np.ndarray:
    """Hand-crafted first block: channel c = rows of band c, weighted 1/16."""
    rows = spec.shape[0]
    if num_channels * BAND_ROWS > rows:
        raise ValueError(
            f"band filters need {num_channels * BAND_ROWS} rows, input has {rows}"
        )
    out = np.zeros((num_channels, rows, spec.shape[1]))
    for channel in range(num_channels):
        start = channel * BAND_ROWS
        out[channel, start : start + BAND_ROWS] = spec[start : start + BAND_ROWS] / BAND_ROWS
    return out


def forward(spec: MelSpectrogram, config: RefNetConfig) -> SampleActivations:
    """Run the reference net, capturing post-ReLU activations per block."""
    if not np.all(np.isfinite(spec.values)):
        raise ValueError("spectrogram contains non-finite values")

    current = spec.values[None, :, :]  # (1, bands, frames)
    records = []
    for block in range(config.num_blocks):
        if block > 0:
            current = _max_pool2(current)
        if block == 0 and config.band_filter_mode:
            pre = _band_filter(spec.values, config.channels[0])
        else:
            pre = _conv3x3(current, block_weights(config, block, current.shape[0]))
        current = np.maximum(pre, 0.0)
        _, height, width = current.shape
        records.append(
            ActivationRecord(
                layer_id=block,
                channels=config.channels[block],
                height=height,
                width=width,
                values=current.reshape(config.channels[block], -1).astype(np.float32),
            )
        )
    return SampleActivations(sample_id="", records=records)
