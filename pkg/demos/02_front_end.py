"""Audio front end: resample, STFT power, mel projection.

A 1 kHz tone lands exactly on FFT bin 64 at 16 kHz / 1024 bins, and only
the mel bands whose triangles cover that bin light up.
"""

import numpy as np

from gramsec import AudioSegment, mel_project, resample, stft_power

rate = 48_000
t = np.arange(rate) / rate
tone = AudioSegment(0.8 * np.sin(2 * np.pi * 1000 * t), rate)

audio = resample(tone, 16_000)
print(f"resampled {tone.samples.size} samples @48kHz -> "
      f"{audio.samples.size} @16kHz")

power = stft_power(audio)
print(f"STFT power matrix: {power.shape[0]} bins x {power.shape[1]} frames")
print(f"peak frequency bin of frame 0: {int(np.argmax(power[:, 0]))} "
      f"(1000 Hz = bin 64)")

mel = mel_project(power)
hot = np.argsort(mel.values[:, 0])[-3:][::-1]
print(f"mel spectrogram: {mel.bands} bands x {mel.frames} frames")
print(f"hottest mel bands in frame 0: {hot.tolist()}")
