"""Mel-spectrogram front end: resampling, STFT power, mel filterbank.

The standard configuration is 16 kHz audio analyzed with 40 ms Hann
windows hopped every 20 ms, zero-padded to a 1024-point FFT, projected
onto 128 triangular mel bands spanning 0-8000 Hz, in log power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

TARGET_RATE = 16_000
FFT_SIZE = 1024
WINDOW_MS = 40
HOP_MS = 20
NUM_BANDS = 128
MEL_FMAX = 8_000.0
LOG_FLOOR = 1e-10

RESAMPLE_TAPS = 32


@dataclass
class AudioSegment:
    """Mono audio: amplitudes (nominally in [-1, 1]) at a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class MelSpectrogram:
    """Log-power mel energies, one row per band."""

    values: np.ndarray  # shape (bands, frames)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise ValueError(f"expected (bands, frames >= 1), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("mel spectrogram contains non-finite values")

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]


def load_wav(path) -> AudioSegment:
    """Read a PCM WAV file (16-bit int or 32-bit float); stereo is averaged."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(
            f"{path}: unsupported WAV sample format {data.dtype}; "
            "expected 16-bit PCM or 32-bit float"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioSegment(samples, int(rate))


def resample(audio: AudioSegment, target_rate: int) -> AudioSegment:
    """Windowed-sinc resampling to target_rate.

    Uses a 32-tap Hann-windowed sinc kernel per output sample, cut off at
    the narrower of the two Nyquist frequencies. Kernel weights are
    renormalized per output position, so a constant signal stays constant
    out to the edges. Matching rates return the samples unchanged.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if audio.samples.size == 0:
        raise ValueError("cannot resample empty audio")
    if target_rate == audio.sample_rate:
        return AudioSegment(audio.samples.copy(), target_rate)

    ratio = target_rate / audio.sample_rate
    out_len = max(1, round(audio.samples.size * ratio))
    half = RESAMPLE_TAPS // 2
    cutoff = min(1.0, ratio)  # fraction of the source Nyquist band kept

    # positions[j] is output sample j in input-sample coordinates
    positions = np.arange(out_len) / ratio
    first = np.floor(positions).astype(np.int64) - (half - 1)
    taps = first[:, None] + np.arange(RESAMPLE_TAPS)[None, :]
    offsets = positions[:, None] - taps

    kernel = np.sinc(cutoff * offsets)
    kernel *= 0.5 + 0.5 * np.cos(np.pi * np.clip(offsets / half, -1.0, 1.0))

    valid = (taps >= 0) & (taps < audio.samples.size)
    kernel *= valid
    gathered = audio.samples[np.clip(taps, 0, audio.samples.size - 1)]
    out = (kernel * gathered).sum(axis=1) / kernel.sum(axis=1)
    return AudioSegment(out, target_rate)


def stft_power(
    audio: AudioSegment,
    fft_size: int = FFT_SIZE,
    window_ms: float = WINDOW_MS,
    hop_ms: float = HOP_MS,
) -> np.ndarray:
    """Squared-magnitude STFT, non-negative frequency bins only.

    Frames are Hann-windowed and zero-padded from the window length up to
    fft_size. At 16 kHz the window is 640 samples with a 320-sample hop, so
    the output is (513, floor((len - 640) / 320) + 1).
    """
    window_len = round(window_ms * audio.sample_rate / 1000)
    hop = round(hop_ms * audio.sample_rate / 1000)
    if window_len > fft_size:
        raise ValueError(f"window of {window_len} samples exceeds fft_size {fft_size}")
    if audio.samples.size < window_len:
        raise ValueError(
            f"audio has {audio.samples.size} samples, need at least {window_len}"
        )
    num_frames = (audio.samples.size - window_len) // hop + 1
    indices = np.arange(num_frames)[:, None] * hop + np.arange(window_len)[None, :]
    frames = audio.samples[indices] * np.hanning(window_len)
    spectrum = np.fft.rfft(frames, n=fft_size, axis=1)
    return (spectrum.real**2 + spectrum.imag**2).T


def hz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    num_bands: int = NUM_BANDS,
    fft_size: int = FFT_SIZE,
    sample_rate: int = TARGET_RATE,
    fmax: float = MEL_FMAX,
) -> np.ndarray:
    """Unit-peak triangular filters on a uniform mel grid, shape (bands, bins).

    Triangles are not area-normalized; the per-layer rescaling downstream
    makes the overall scale immaterial.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(fmax), num_bands + 2))
    bin_freqs = np.fft.rfftfreq(fft_size, 1.0 / sample_rate)
    bank = np.zeros((num_bands, bin_freqs.size))
    for band in range(num_bands):
        left, center, right = edges[band], edges[band + 1], edges[band + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[band] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def mel_project(power: np.ndarray, num_bands: int = NUM_BANDS) -> MelSpectrogram:
    """Project an STFT power matrix onto log-scaled mel bands."""
    power = np.asarray(power, dtype=np.float64)
    if not np.all(np.isfinite(power)):
        raise ValueError("power matrix contains non-finite values")
    if np.any(power < 0):
        raise ValueError("power matrix contains negative values")
    bank = mel_filterbank(num_bands=num_bands, fft_size=(power.shape[0] - 1) * 2)
    return MelSpectrogram(np.log(bank @ power + LOG_FLOOR))


def mel_spectrogram(audio: AudioSegment) -> MelSpectrogram:
    """Full front end: resample to 16 kHz, STFT power, mel projection."""
    resampled = resample(audio, TARGET_RATE)
    return mel_project(stft_power(resampled))
