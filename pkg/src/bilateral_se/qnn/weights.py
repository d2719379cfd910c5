"""Weight tensors, the left/right parameter set, and seeded initialisation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..dsp import ConfigError
from ..features import Mode, feature_length
from ..link import fake_quantize

WEIGHT_BITS = 8
BIAS_BITS = 16
ACT_BITS = 16
SIDES = ("left", "right")


class FormatError(ValueError):
    """Malformed weight container or tensor."""


@dataclass(frozen=True)
class ModelHyperparams:
    P: int = 128
    U: int = 32
    G: int = 8
    K: int = 5
    B: int = 396
    M: int = 2
    F: int = 33
    post_taps: Optional[int] = None  # None -> K taps; K + 1 for the inclusive sum

    def __post_init__(self):
        if self.P % self.G:
            raise ConfigError("P must be divisible by G")
        if self.post_taps is not None and self.post_taps not in (self.K, self.K + 1):
            raise ConfigError("post_taps must be K or K + 1")

    @property
    def taps(self) -> int:
        return self.K if self.post_taps is None else self.post_taps

    @property
    def group_width(self) -> int:
        return self.P // self.G

    @classmethod
    def for_mode(cls, mode, **kw) -> "ModelHyperparams":
        return cls(B=feature_length(mode, kw.get("F", 33)), **kw)


@dataclass
class QuantizedTensor:
    name: str
    shape: tuple
    bits: int
    values: np.ndarray

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.shape)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def on_grid(self) -> bool:
        if self.bits == 0:
            return bool(np.all(np.isfinite(self.values)))
        return bool(np.array_equal(fake_quantize(self.values, self.bits), self.values))

    def validate(self):
        if not self.on_grid():
            raise FormatError(f"tensor {self.name!r} has values off the {self.bits}-bit grid")


def layer_shapes(hp: ModelHyperparams) -> Dict[str, tuple]:
    """Per-side tensor names (without side prefix) mapped to (shape, bits)."""
    P, U, B, gw = hp.P, hp.U, hp.B, hp.group_width
    shapes = {
        "quant_eq/weight": ((B,), 0),
        "quant_eq/bias": ((B,), 0),
    }

    def fc(name, out, inp):
        shapes[f"{name}/weight"] = ((out, inp), WEIGHT_BITS)
        shapes[f"{name}/bias"] = ((out,), BIAS_BITS)

    def dconv(name, ch, k):
        shapes[f"{name}/weight"] = ((ch, k), WEIGHT_BITS)
        shapes[f"{name}/bias"] = ((ch,), BIAS_BITS)

    fc("input_fc", P, B)
    fc("group_fc", U, gw)
    dconv("conv/dw5", U, 5)
    fc("conv/pw5", U, U)
    dconv("conv/dw3", U, 3)
    fc("conv/pw3", U, U)
    dconv("conv/skip", U, 1)
    for tac in ("tac1", "tac2"):
        fc(f"{tac}/transform", 2 * U, U)
        fc(f"{tac}/average", 2 * U, 2 * U)
        fc(f"{tac}/concat", U, 4 * U)
    for layer in ("gru/layer0", "gru/layer1"):
        shapes[f"{layer}/w_ih"] = ((3 * U, U), WEIGHT_BITS)
        shapes[f"{layer}/w_hh"] = ((3 * U, U), WEIGHT_BITS)
        shapes[f"{layer}/b_ih"] = ((3 * U,), BIAS_BITS)
        shapes[f"{layer}/b_hh"] = ((3 * U,), BIAS_BITS)
    dconv("gru/skip", U, 1)
    fc("ungroup_fc", gw, U)
    fc("spatial_head", 2 * hp.M * hp.F, P)
    fc("post_head", 2 * hp.taps * hp.F, P)
    return shapes


def is_shared(name: str) -> bool:
    """Conv and GRU modules are shared between groups and between sides."""
    return name.startswith(("conv/", "gru/"))


@dataclass
class ModelWeights:
    """Left and right parameter dicts; shared entries are the same objects.

    ``kind`` is ``"gcfs"`` for the neural estimator or ``"passthrough"`` for
    the fixed-filter test fixture (which carries no tensors).
    """

    hp: ModelHyperparams
    mode: Mode
    left: Dict[str, QuantizedTensor] = field(default_factory=dict)
    right: Dict[str, QuantizedTensor] = field(default_factory=dict)
    kind: str = "gcfs"

    def side(self, name: str) -> Dict[str, QuantizedTensor]:
        if name not in SIDES:
            raise ConfigError(f"unknown side {name!r}")
        return self.left if name == "left" else self.right

    @property
    def shared(self) -> Dict[str, QuantizedTensor]:
        return {k: v for k, v in self.left.items() if is_shared(k)}

    def validate(self):
        if self.kind == "passthrough":
            return
        expected = layer_shapes(self.hp)
        for side in SIDES:
            tensors = self.side(side)
            missing = set(expected) - set(tensors)
            if missing:
                raise FormatError(f"{side}: missing tensors {sorted(missing)}")
            for key, (shape, bits) in expected.items():
                t = tensors[key]
                if t.shape != shape or t.bits != bits:
                    raise FormatError(f"{side}/{key}: expected {shape}@{bits}b, got {t.shape}@{t.bits}b")
                t.validate()
        for key in self.shared:
            if self.left[key] is not self.right[key]:
                raise FormatError(f"shared tensor {key!r} is not aliased between sides")


def init_random(hp: ModelHyperparams, seed: int = 0, mode=Mode.LOWB) -> ModelWeights:
    """Seeded, on-grid random weights (Glorot-uniform scale, small biases)."""
    rng = np.random.default_rng(seed)
    shapes = layer_shapes(hp)
    weights = ModelWeights(hp, Mode(mode))
    shared = {}
    for side in SIDES:
        tensors = weights.side(side)
        for key, (shape, bits) in shapes.items():
            if is_shared(key) and key in shared:
                tensors[key] = shared[key]
                continue
            # unquantized quantEQ values stay float32-representable for the container
            if key == "quant_eq/weight":
                vals = rng.uniform(0.5, 1.5, shape).astype(np.float32)
            elif key == "quant_eq/bias":
                vals = rng.uniform(-0.05, 0.05, shape).astype(np.float32)
            elif bits == WEIGHT_BITS:
                fan_in = shape[1]
                fan_out = shape[0] if len(shape) == 2 and shape[1] > 1 else 1
                lim = min(np.sqrt(6.0 / (fan_in + fan_out)), 0.99)
                vals = fake_quantize(rng.uniform(-lim, lim, shape), bits)
            else:
                vals = fake_quantize(rng.uniform(-0.05, 0.05, shape), bits)
            name = f"shared/{key}" if is_shared(key) else f"{side}/{key}"
            t = QuantizedTensor(name, shape, bits, vals)
            tensors[key] = t
            if is_shared(key):
                shared[key] = t
    return weights


def zero_weights(hp: ModelHyperparams, mode=Mode.LOWB) -> ModelWeights:
    w = init_random(hp, 0, mode)
    for t in w.left.values():
        t.values[...] = 0.0
    for t in w.right.values():
        t.values[...] = 0.0
    return w


def passthrough_weights(hp: ModelHyperparams, mode=Mode.LOWB) -> ModelWeights:
    """Fixture selecting the front microphone with a single-tap post-filter."""
    return ModelWeights(hp, Mode(mode), kind="passthrough")


def count_parameters(weights: ModelWeights, side: str = "left") -> int:
    """Parameters seen by one side model; shared tensors count once per side."""
    return sum(t.size for t in weights.side(side).values())


def count_parameters_closed_form(hp: ModelHyperparams) -> int:
    P, U, B, gw, F = hp.P, hp.U, hp.B, hp.group_width, hp.F
    quant_eq = 2 * B
    input_fc = B * P + P
    group_fc = gw * U + U
    conv = (5 * U + U + U * U + U) + (3 * U + U + U * U + U) + 2 * U
    tac = (U * 2 * U + 2 * U) + (4 * U * U + 2 * U) + (4 * U * U + U)
    gru = 2 * 3 * (2 * U * U + 2 * U) + 2 * U
    ungroup = U * gw + gw
    heads = (P + 1) * 2 * hp.M * F + (P + 1) * 2 * hp.taps * F
    return quant_eq + input_fc + group_fc + conv + 2 * tac + gru + ungroup + heads


def count_macs_per_frame(hp: ModelHyperparams) -> int:
    """Multiply-accumulates of one forward pass plus both filtering stages."""
    P, U, G, B, gw, F = hp.P, hp.U, hp.G, hp.B, hp.group_width, hp.F
    macs = B  # quantEQ
    macs += B * P
    macs += G * gw * U
    macs += G * (5 * U + U * U + 3 * U + U * U + U)
    tac = G * (U * 2 * U) + 2 * U * 2 * U + G * (4 * U * U)
    macs += 2 * tac
    macs += G * (2 * 3 * 2 * U * U + U)
    macs += G * U * gw
    macs += P * 2 * hp.M * F + P * 2 * hp.taps * F
    # complex MAC = 4 real MACs
    macs += 4 * F * (hp.M + hp.taps)
    return macs


def count_macs_per_second(hp: ModelHyperparams, frames_per_second: int = 1000) -> float:
    return float(count_macs_per_frame(hp) * frames_per_second)
