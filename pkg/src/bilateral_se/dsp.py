"""Streaming STFT / iSTFT with sqrt-Hann windows and weighted overlap-add.

The default configuration is the 2 ms / 1 ms low-latency framing at 16 kHz:
32-sample frames, 16-sample hop, 16 zeros padded on each side, 64-point FFT
(33 non-negative bins). Every push consumes exactly one hop per channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised on shape or configuration mismatches."""


class NumericError(ValueError):
    """Raised when non-finite values reach the signal path."""


@dataclass(frozen=True)
class StftConfig:
    sample_rate_hz: int = 16000
    frame_len: int = 32
    hop: int = 16
    fft_len: int = 64
    pad_front: int = 16
    pad_back: int = 16

    def __post_init__(self):
        if self.frame_len <= 0 or self.frame_len % 2:
            raise ConfigError(f"frame_len must be even and > 0, got {self.frame_len}")
        if self.frame_len != 2 * self.hop:
            raise ConfigError("frame_len must equal 2 * hop")
        if self.pad_front != self.pad_back:
            raise ConfigError("front and back padding must be equal")
        if self.fft_len != self.frame_len + self.pad_front + self.pad_back:
            raise ConfigError("fft_len must equal frame_len + pad_front + pad_back")

    @property
    def bins(self) -> int:
        return self.fft_len // 2 + 1


DEFAULT_CONFIG = StftConfig()
# 20 ms / 10 ms framing used by the loss functions.
LOSS_CONFIG = StftConfig(frame_len=320, hop=160, fft_len=320, pad_front=0, pad_back=0)


@dataclass
class Window:
    coeffs: np.ndarray


@dataclass
class FrameSpectrum:
    data: np.ndarray  # (mics, bins) complex64
    frame_index: int

    @property
    def mics(self) -> int:
        return self.data.shape[0]


def make_window(config: StftConfig = DEFAULT_CONFIG) -> Window:
    """Square root of the periodic Hann window of length ``frame_len`` (float64 coefficients)."""
    n = config.frame_len
    if n <= 0 or n % 2:
        raise ConfigError(f"frame_len must be even and > 0, got {n}")
    k = np.arange(n)
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)
    return Window(np.sqrt(np.clip(hann, 0.0, None)))


@dataclass
class StftState:
    """Analysis state for ``channels`` synchronous signals.

    The sample history is primed with zeros, so the frame emitted on push
    ``t`` covers input samples ``[(t - 1) * hop, (t + 1) * hop)``.
    """

    config: StftConfig = DEFAULT_CONFIG
    channels: int = 1
    dtype: type = np.float32
    frame_index: int = 0
    history: np.ndarray = field(init=False)
    window: np.ndarray = field(init=False)

    def __post_init__(self):
        self.history = np.zeros((self.channels, self.config.frame_len), dtype=self.dtype)
        self.window = make_window(self.config).coeffs.astype(self.dtype)
        self._padded = np.zeros((self.channels, self.config.fft_len), dtype=self.dtype)
        self._cdtype = np.result_type(self.dtype, np.complex64)

    def reset(self):
        self.history[:] = 0.0
        self.frame_index = 0


def stft_push(state: StftState, block) -> FrameSpectrum:
    """Consume one hop per channel and return the newest frame spectrum."""
    cfg = state.config
    block = np.asarray(block, dtype=state.dtype)
    if block.ndim == 1:
        block = block[None, :]
    if block.shape != (state.channels, cfg.hop):
        raise ConfigError(
            f"expected block of shape {(state.channels, cfg.hop)}, got {block.shape}"
        )
    hist = state.history
    hist[:, : cfg.frame_len - cfg.hop] = hist[:, cfg.hop :]
    hist[:, cfg.frame_len - cfg.hop :] = block
    padded = state._padded
    padded[:, cfg.pad_front : cfg.pad_front + cfg.frame_len] = hist * state.window
    spec = np.fft.rfft(padded, axis=-1).astype(state._cdtype, copy=False)
    frame = FrameSpectrum(spec, state.frame_index)
    state.frame_index += 1
    return frame


@dataclass
class IstftState:
    config: StftConfig = DEFAULT_CONFIG
    dtype: type = np.float32
    accum: np.ndarray = field(init=False)
    window: np.ndarray = field(init=False)

    def __post_init__(self):
        self.accum = np.zeros(self.config.frame_len, dtype=self.dtype)
        self.window = make_window(self.config).coeffs.astype(self.dtype)

    def reset(self):
        self.accum[:] = 0.0


def istft_push(state: IstftState, frame) -> np.ndarray:
    """Overlap-add one frame and return the hop of samples it completes.

    The output lags the analysis input by ``frame_len - hop`` samples.
    """
    cfg = state.config
    spec = np.asarray(frame.data if isinstance(frame, FrameSpectrum) else frame)
    if spec.ndim != 1 or spec.shape[0] != cfg.bins:
        raise ConfigError(f"expected {cfg.bins} bins, got shape {spec.shape}")
    if not np.all(np.isfinite(spec)):
        raise NumericError("non-finite values in frame")
    time = np.fft.irfft(spec, n=cfg.fft_len).astype(state.dtype, copy=False)
    seg = time[cfg.pad_front : cfg.pad_front + cfg.frame_len] * state.window
    acc = state.accum
    acc += seg
    out = acc[: cfg.hop].copy()
    acc[: cfg.frame_len - cfg.hop] = acc[cfg.hop :]
    acc[cfg.frame_len - cfg.hop :] = 0.0
    return out


def _pad_to_hop(x: np.ndarray, hop: int) -> np.ndarray:
    rem = (-x.shape[-1]) % hop
    if rem:
        x = np.concatenate([x, np.zeros(x.shape[:-1] + (rem,), dtype=x.dtype)], axis=-1)
    return x


def stft(signal, config: StftConfig = DEFAULT_CONFIG, dtype=np.float32) -> np.ndarray:
    """Batch STFT built on :func:`stft_push`.

    ``signal`` is ``(samples,)`` or ``(channels, samples)``; the tail is zero
    padded to a hop multiple. Returns ``(frames, channels, bins)``, or
    ``(frames, bins)`` for 1-D input.
    """
    x = np.asarray(signal, dtype=dtype)
    mono = x.ndim == 1
    if mono:
        x = x[None, :]
    x = _pad_to_hop(x, config.hop)
    state = StftState(config, channels=x.shape[0], dtype=dtype)
    n_frames = x.shape[1] // config.hop
    out = np.empty((n_frames, x.shape[0], config.bins), dtype=state._cdtype)
    for t in range(n_frames):
        out[t] = stft_push(state, x[:, t * config.hop : (t + 1) * config.hop]).data
    return out[:, 0] if mono else out


def istft(frames, config: StftConfig = DEFAULT_CONFIG, dtype=np.float32) -> np.ndarray:
    """Batch inverse of :func:`stft` for ``(frames, bins)``; output is delayed by ``hop``."""
    state = IstftState(config, dtype=dtype)
    return np.concatenate([istft_push(state, f) for f in frames] or [np.zeros(0, dtype)])
