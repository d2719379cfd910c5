"""Binaural link simulation: frame-shift-aligned delay plus fixed-range quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import ConfigError

SAMPLES_PER_MS = 16


@dataclass(frozen=True)
class QuantizerSpec:
    bits: int

    def __post_init__(self):
        if not 1 <= self.bits <= 32:
            raise ConfigError(f"bits must be in [1, 32], got {self.bits}")

    @property
    def step(self) -> float:
        return 2.0 ** (1 - self.bits)

    @property
    def lo(self) -> float:
        return -1.0

    @property
    def hi(self) -> float:
        return 1.0 - self.step


@dataclass(frozen=True)
class LinkConfig:
    delay_ms: int = 0
    bits: int = 16

    def __post_init__(self):
        if int(self.delay_ms) != self.delay_ms or self.delay_ms < 0:
            raise ConfigError(f"delay_ms must be a non-negative integer, got {self.delay_ms}")
        QuantizerSpec(self.bits)

    @property
    def delay_samples(self) -> int:
        return int(self.delay_ms) * SAMPLES_PER_MS

    @property
    def quantizer(self) -> QuantizerSpec:
        return QuantizerSpec(self.bits)


def fake_quantize(x, spec):
    """Snap to the uniform grid ``k * 2**(1 - bits)`` on ``[-1, 1 - step]``.

    Ties round half away from zero. ``spec`` may be a :class:`QuantizerSpec`
    or a plain bit width.
    """
    bits = spec.bits if isinstance(spec, QuantizerSpec) else int(spec)
    scale = 2.0 ** (bits - 1)
    hi = 1.0 - 1.0 / scale
    y = np.asarray(x, dtype=np.float64) * scale
    t = np.trunc(y)
    # y - t is exact, so the tie test is exact too
    y = np.clip((t + np.sign(y) * (np.abs(y - t) >= 0.5)) / scale, -1.0, hi)
    return y if y.ndim else float(y)


def transmit(signal, cfg: LinkConfig) -> np.ndarray:
    """Delay by ``16 * delay_ms`` samples (front zero padding) and quantize.

    ``signal`` is ``(samples,)`` or ``(channels, samples)``; the output has the
    same shape.
    """
    x = np.asarray(signal, dtype=np.float64)
    d = cfg.delay_samples
    out = np.zeros_like(x)
    n = x.shape[-1]
    if d < n:
        out[..., d:] = fake_quantize(x[..., : n - d], cfg.bits)
    return out


class LinkChannel:
    """Streaming form of :func:`transmit` for hop-sized multichannel blocks."""

    def __init__(self, cfg: LinkConfig, channels: int, hop: int = SAMPLES_PER_MS):
        self.cfg = cfg
        self.hop = hop
        self._buf = np.zeros((channels, cfg.delay_samples + hop))

    def push(self, block) -> np.ndarray:
        block = np.asarray(block, dtype=np.float64)
        buf = self._buf
        buf[:, -self.hop :] = fake_quantize(block, self.cfg.bits)
        out = buf[:, : self.hop].copy()
        buf[:, : -self.hop] = buf[:, self.hop :]
        return out
