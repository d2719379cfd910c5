"""Streaming two-sided enhancer: filter-and-sum, multi-frame post-filter, overlap-add.

Each call to :meth:`Enhancer.process_block` consumes 1 ms (16 samples) from
each of the four microphones and returns 1 ms per ear. The output block
produced from input block ``t`` is released on call ``t + 1``, so the
input-to-output delay equals the 32-sample (2 ms) frame length.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .dsp import DEFAULT_CONFIG, ConfigError, FrameSpectrum, IstftState, StftState, istft_push, stft_push
from .features import FeatureConfig, Mode, assemble_features
from .link import LinkChannel, LinkConfig
from .qnn.model import build_side_model
from .qnn.weights import ModelWeights


def apply_spatial(frame, W) -> np.ndarray:
    """Filter-and-sum over microphones: ``sum_m Y[m, f] * W[m, f]``."""
    Y = np.asarray(frame.data if isinstance(frame, FrameSpectrum) else frame)
    W = np.asarray(W)
    if Y.shape != W.shape:
        raise ConfigError(f"spectrum {Y.shape} and weights {W.shape} differ")
    return (Y * W).sum(axis=0)


def apply_postfilter(history, C) -> np.ndarray:
    """Causal multi-frame filter; ``history[k]`` holds the intermediate spectrum of frame ``t - k``."""
    history = np.asarray(history)
    C = np.asarray(C)
    if history.shape != C.shape:
        raise ConfigError(f"history {history.shape} and taps {C.shape} differ")
    return (history * C).sum(axis=0)


class _Side:
    def __init__(self, weights: ModelWeights, name: str, fcfg: FeatureConfig):
        self.name = name
        self.fcfg = fcfg
        self.model = build_side_model(weights, name)
        self.model_state = self.model.new_state()
        hp = weights.hp
        self.history = np.zeros((hp.taps, hp.F), dtype=np.complex128)
        self.istft = IstftState(DEFAULT_CONFIG)
        self.pending = np.zeros(DEFAULT_CONFIG.hop, dtype=np.float32)

    def step(self, ipsi: FrameSpectrum, contra, aligned) -> np.ndarray:
        feats = assemble_features(ipsi, contra, self.fcfg, aligned)
        filters = self.model.forward(self.model_state, feats)
        s_tilde = apply_spatial(ipsi.data, filters.W)
        hist = self.history
        hist[1:] = hist[:-1]
        hist[0] = s_tilde
        s_hat = apply_postfilter(hist, filters.C)
        out = self.pending
        self.pending = istft_push(self.istft, s_hat.astype(np.complex64))
        return out


class Enhancer:
    """Owns all streaming state for both ears (single caller at a time).

    Microphone rows are ``[front, rear]`` per side. In ``lowb`` mode each side
    receives the other side's microphones through a :class:`LinkChannel`
    (delay + quantization) and computes its binaural IPDs against its own
    spectra delayed by the same number of frames. ``bin`` mode uses a
    zero-delay link, quantized only if ``link`` is given.
    """

    def __init__(self, weights: ModelWeights, mode=None, link: Optional[LinkConfig] = None):
        mode = Mode(mode if mode is not None else weights.mode)
        if weights.kind != "passthrough" and weights.hp.B != FeatureConfig(mode, link=link or LinkConfig()).length:
            raise ConfigError(f"weights expect {weights.hp.B} features, {mode.value} mode produces a different length")
        if mode is Mode.LOWB and link is None:
            raise ConfigError("lowb mode requires a link configuration")
        if mode is Mode.BIN and link is not None and link.delay_ms != 0:
            raise ConfigError("bin mode requires delay_ms = 0")
        self.mode = mode
        self.link = link
        hp = weights.hp
        if hp.M != 2:
            raise ConfigError("the enhancer expects two microphones per side")
        self.stft = StftState(DEFAULT_CONFIG, channels=4)
        self.link_channel = LinkChannel(link, channels=4) if (link is not None and mode is not Mode.UNI) else None
        self.link_stft = StftState(DEFAULT_CONFIG, channels=4) if self.link_channel else None
        self.delay_frames = link.delay_ms if (link is not None and mode is Mode.LOWB) else 0
        self._aligned = [np.zeros((4, DEFAULT_CONFIG.bins), np.complex64) for _ in range(self.delay_frames)]
        self.sides = {
            name: _Side(weights, name, FeatureConfig(mode, link=link)) for name in ("left", "right")
        }
        self.block_index = 0

    def process_block(self, left_mics, right_mics):
        """Consume 16 samples from each of ``left_mics`` (2, 16) and ``right_mics`` (2, 16)."""
        hop = DEFAULT_CONFIG.hop
        left = np.asarray(left_mics, dtype=np.float32)
        right = np.asarray(right_mics, dtype=np.float32)
        if left.shape != (2, hop) or right.shape != (2, hop):
            raise ConfigError(f"expected (2, {hop}) blocks per side, got {left.shape} and {right.shape}")
        block = np.concatenate([left, right])
        raw = stft_push(self.stft, block)
        t = raw.frame_index

        contra_l = contra_r = aligned_l = aligned_r = None
        if self.mode is not Mode.UNI:
            if self.link_channel is not None:
                sent = stft_push(self.link_stft, self.link_channel.push(block).astype(np.float32)).data
            else:
                sent = raw.data
            contra_l = FrameSpectrum(sent[2:], t)
            contra_r = FrameSpectrum(sent[:2], t)
            if self.mode is Mode.LOWB:
                if self.delay_frames:
                    self._aligned.append(raw.data)
                    past = self._aligned.pop(0)
                else:
                    past = raw.data
                aligned_l = FrameSpectrum(past[:2], t)
                aligned_r = FrameSpectrum(past[2:], t)

        out_l = self.sides["left"].step(FrameSpectrum(raw.data[:2], t), contra_l, aligned_l)
        out_r = self.sides["right"].step(FrameSpectrum(raw.data[2:], t), contra_r, aligned_r)
        self.block_index += 1
        return out_l, out_r


def enhance(weights: ModelWeights, mics, mode=None, link: Optional[LinkConfig] = None) -> np.ndarray:
    """Offline wrapper: ``mics`` is (4, samples) ordered L-front, L-rear, R-front, R-rear.

    Returns (2, samples) for left and right, streamed block by block.
    """
    x = np.asarray(mics, dtype=np.float32)
    if x.ndim != 2 or x.shape[0] != 4:
        raise ConfigError(f"expected 4 microphone channels, got shape {x.shape}")
    hop = DEFAULT_CONFIG.hop
    n = x.shape[1]
    pad = (-n) % hop
    if pad:
        x = np.concatenate([x, np.zeros((4, pad), np.float32)], axis=1)
    eng = Enhancer(weights, mode, link)
    out = np.zeros((2, x.shape[1]), dtype=np.float32)
    for b in range(x.shape[1] // hop):
        sl = slice(b * hop, (b + 1) * hop)
        out[0, sl], out[1, sl] = eng.process_block(x[:2, sl], x[2:, sl])
    return out[:, :n]
