"""Streaming forward pass of the grouped filter-estimation network.

All arithmetic is float64 with values snapped to fixed-point grids: weights
on the 8-bit grid, biases and every layer output on the 16-bit grid. Because
each product of an 8-bit weight and a 16-bit activation is a multiple of
2**-22 with magnitude below one, the dot products are exact in float64 and
the result does not depend on summation order. The per-frame work runs in
the JIT kernels of :mod:`.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from ..dsp import ConfigError
from . import kernels
from .weights import ACT_BITS, ModelHyperparams, ModelWeights, QuantizedTensor

_SCALE = float(2 ** (ACT_BITS - 1))
_HI = 1.0 - 1.0 / _SCALE


def q16(x: np.ndarray) -> np.ndarray:
    """16-bit fake quantization, ties away from zero (same grid as the link quantizer)."""
    y = x * _SCALE
    a = np.abs(y)
    f = np.floor(a)
    f += a - f >= 0.5
    np.copysign(f, y, out=f)
    f *= 1.0 / _SCALE
    return np.clip(f, -1.0, _HI, out=f)


@dataclass
class FilterSet:
    W: np.ndarray  # (M, F) complex spatial weights
    C: np.ndarray  # (taps, F) complex post-filter
    frame_index: int = 0


class ModelState:
    """Causal buffers: conv input histories and GRU hidden states."""

    def __init__(self, hp: ModelHyperparams):
        G, U = hp.G, hp.U
        self.hp = hp
        self.conv5 = np.zeros((G, 4, U))  # last 4 inputs of the k=5 depthwise conv
        self.conv3 = np.zeros((G, 2, U))  # last 2 inputs of the k=3 depthwise conv
        self.gru = np.zeros((2, G, U))
        self.frame_index = 0

    def reset(self):
        self.conv5[:] = 0.0
        self.conv3[:] = 0.0
        self.gru[:] = 0.0
        self.frame_index = 0


_PARAM_ORDER = (
    "quant_eq/weight", "quant_eq/bias", "input_fc/weight", "input_fc/bias",
    "group_fc/weight", "group_fc/bias",
    "conv/dw5/weight", "conv/dw5/bias", "conv/pw5/weight", "conv/pw5/bias",
    "conv/dw3/weight", "conv/dw3/bias", "conv/pw3/weight", "conv/pw3/bias",
    "conv/skip/weight", "conv/skip/bias",
    "tac1/transform/weight", "tac1/transform/bias", "tac1/average/weight",
    "tac1/average/bias", "tac1/concat/weight", "tac1/concat/bias",
    "gru/layer0/w_ih", "gru/layer0/w_hh", "gru/layer0/b_ih", "gru/layer0/b_hh",
    "gru/layer1/w_ih", "gru/layer1/w_hh", "gru/layer1/b_ih", "gru/layer1/b_hh",
    "gru/skip/weight", "gru/skip/bias",
    "tac2/transform/weight", "tac2/transform/bias", "tac2/average/weight",
    "tac2/average/bias", "tac2/concat/weight", "tac2/concat/bias",
    "ungroup_fc/weight", "ungroup_fc/bias", "spatial_head/weight", "spatial_head/bias",
    "post_head/weight", "post_head/bias",
)


class SideModel:
    """Filter estimator for one side, bound to that side's tensor dict.

    Weight arrays are referenced, not copied, so in-place edits to shared
    tensors are seen by both side models.
    """

    def __init__(self, weights: ModelWeights, side: str):
        if weights.kind != "gcfs":
            raise ConfigError(f"cannot build a network from {weights.kind!r} weights")
        self.hp = weights.hp
        self.side = side
        self.t: Dict[str, QuantizedTensor] = weights.side(side)
        self._params = tuple(self.t[k].values for k in _PARAM_ORDER)
        self._sp = np.empty(2 * self.hp.M * self.hp.F)
        self._pf = np.empty(2 * self.hp.taps * self.hp.F)

    def new_state(self) -> ModelState:
        return ModelState(self.hp)

    def forward(self, state: ModelState, features) -> FilterSet:
        return forward_frame(self, state, features)


def quant_eq(x, weight, bias) -> np.ndarray:
    """Unquantized per-feature affine scaling followed by a 16-bit snap."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if x.shape != weight.shape or x.shape != np.shape(bias):
        raise ConfigError(f"shape mismatch: x {x.shape}, weight {weight.shape}, bias {np.shape(bias)}")
    return q16(x * weight + bias)


def tac(h, model: SideModel, name: str = "tac1") -> np.ndarray:
    """Transform-average-concatenate across groups (rows of ``h``) with residual add."""
    h = np.ascontiguousarray(h, dtype=np.float64)
    U = model.hp.U
    if h.ndim != 2 or h.shape[1] != U or h.shape[0] < 1:
        raise ConfigError(f"expected (G, {U}) group matrix, got {h.shape}")
    w = model.t
    out = np.empty_like(h)
    kernels.tac_kernel(
        h,
        w[f"{name}/transform/weight"].values, w[f"{name}/transform/bias"].values,
        w[f"{name}/average/weight"].values, w[f"{name}/average/bias"].values,
        w[f"{name}/concat/weight"].values, w[f"{name}/concat/bias"].values,
        out,
    )
    return out


def forward_frame(model: SideModel, state: ModelState, features) -> FilterSet:
    """Run one frame through the network and return the estimated filters."""
    hp = model.hp
    if not isinstance(state, ModelState):
        raise ConfigError("model state is not initialised")
    x = np.ascontiguousarray(getattr(features, "values", features), dtype=np.float64)
    if x.shape != (hp.B,):
        raise ConfigError(f"expected {hp.B} features, got shape {x.shape}")
    sp, pf = model._sp, model._pf
    kernels.forward_kernel(x, state.conv5, state.conv3, state.gru, *model._params, sp, pf)
    mf = hp.M * hp.F
    kf = hp.taps * hp.F
    W = (sp[:mf] + 1j * sp[mf:]).reshape(hp.M, hp.F)
    C = (pf[:kf] + 1j * pf[kf:]).reshape(hp.taps, hp.F)
    fs = FilterSet(W, C, state.frame_index)
    state.frame_index += 1
    return fs


class PassthroughModel:
    """Fixed-filter estimator: select the front microphone, single-tap post-filter."""

    def __init__(self, hp: ModelHyperparams):
        self.hp = hp
        W = np.zeros((hp.M, hp.F), complex)
        W[0] = 1.0
        C = np.zeros((hp.taps, hp.F), complex)
        C[0] = 1.0
        self._W, self._C = W, C

    def new_state(self) -> ModelState:
        return ModelState(self.hp)

    def forward(self, state: ModelState, features) -> FilterSet:
        fs = FilterSet(self._W, self._C, state.frame_index)
        state.frame_index += 1
        return fs


def build_side_model(weights: ModelWeights, side: str):
    if weights.kind == "passthrough":
        return PassthroughModel(weights.hp)
    return SideModel(weights, side)
