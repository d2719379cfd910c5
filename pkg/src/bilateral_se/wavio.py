"""WAV read/write: 16-bit PCM or 32-bit float in, 32-bit float out, 16 kHz only."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .dsp import ConfigError

SAMPLE_RATE = 16000


def read_wav(path, expect_rate: int = SAMPLE_RATE):
    """Return ``(rate, data)`` with data shaped (channels, samples) as float64 in [-1, 1)."""
    try:
        rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if expect_rate is not None and rate != expect_rate:
        raise ConfigError(f"{path}: sample rate {rate} Hz, expected {expect_rate} Hz (no resampling)")
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        data = data.astype(np.float64)
    else:
        raise ConfigError(f"{path}: unsupported sample format {data.dtype}")
    data = data.reshape(data.shape[0], -1).T
    return rate, np.ascontiguousarray(data)


def write_wav(path, data, rate: int = SAMPLE_RATE) -> None:
    """Write (channels, samples) or (samples,) as 32-bit float."""
    x = np.asarray(data, dtype=np.float32)
    if x.ndim == 2:
        x = x.T
    wavfile.write(str(path), rate, np.ascontiguousarray(x))
