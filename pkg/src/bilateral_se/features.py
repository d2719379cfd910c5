"""Per-frame model input features: log magnitudes and sin/cos phase differences."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .dsp import ConfigError, FrameSpectrum
from .link import LinkConfig

LOG_FLOOR = 1e-7
LOG_SCALE = 7.0
IPD_EPS = 1e-9


class Mode(str, enum.Enum):
    UNI = "uni"
    LOWB = "lowb"
    BIN = "bin"


# Blocks of `bins` values per mode: log magnitudes + sin/cos pairs.
_BLOCKS = {Mode.UNI: 4, Mode.LOWB: 12, Mode.BIN: 10}


def feature_length(mode, bins: int = 33) -> int:
    return _BLOCKS[Mode(mode)] * bins


@dataclass
class FeatureConfig:
    """Which microphones feed the features of one side.

    ``ipsi_mics`` and ``contra_mics`` index rows of the ipsilateral and
    contralateral :class:`FrameSpectrum` (front first, then rear). The
    reference microphone is the ipsilateral front.
    """

    mode: Mode = Mode.UNI
    ipsi_mics: tuple = (0, 1)
    contra_mics: tuple = (0, 1)
    link: Optional[LinkConfig] = None
    reference_mic: int = field(init=False)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.reference_mic = self.ipsi_mics[0]
        if self.mode is Mode.LOWB and self.link is None:
            raise ConfigError("lowb mode requires a link configuration")
        if self.mode is Mode.BIN and self.link is not None and self.link.delay_ms != 0:
            raise ConfigError("bin mode assumes a zero-delay link")

    @property
    def length(self) -> int:
        return feature_length(self.mode)


@dataclass
class FeatureVector:
    values: np.ndarray
    frame_index: int


@njit(cache=True)
def _logmag_into(z, out):
    for f in range(z.shape[0]):
        v = math.log10(math.hypot(z[f].real, z[f].imag) + LOG_FLOOR) / LOG_SCALE
        out[f] = min(max(v, -1.0), 1.0)


@njit(cache=True)
def _ipd_into(a, b, sin, cos):
    # sin/cos of angle(a) - angle(b) straight from a * conj(b)
    for f in range(a.shape[0]):
        ar, ai = a[f].real, a[f].imag
        br, bi = b[f].real, b[f].imag
        re = ar * br + ai * bi
        im = ai * br - ar * bi
        mag = math.hypot(re, im)
        if math.hypot(ar, ai) >= IPD_EPS and math.hypot(br, bi) >= IPD_EPS and mag > 0.0:
            sin[f] = im / mag
            cos[f] = re / mag
        else:
            sin[f] = 0.0
            cos[f] = 1.0


_UNI, _LOWB, _BIN = 0, 1, 2


@njit(cache=True)
def _assemble(mode, ipsi, contra, aligned, front, rear, c0, c1, out):
    F = ipsi.shape[1]
    if mode == _BIN:
        mics = (ipsi[front], ipsi[rear], contra[c0], contra[c1])
        for m in range(4):
            _logmag_into(mics[m], out[m * F:(m + 1) * F])
        for i in range(3):
            _ipd_into(mics[0], mics[i + 1], out[(4 + i) * F:(5 + i) * F], out[(7 + i) * F:(8 + i) * F])
        return
    _logmag_into(ipsi[front], out[:F])
    _logmag_into(ipsi[rear], out[F:2 * F])
    _ipd_into(ipsi[front], ipsi[rear], out[2 * F:3 * F], out[3 * F:4 * F])
    if mode == _LOWB:
        _logmag_into(contra[c0], out[4 * F:5 * F])
        _logmag_into(contra[c1], out[5 * F:6 * F])
        others = (aligned[rear], contra[c0], contra[c1])
        for i in range(3):
            _ipd_into(aligned[front], others[i], out[(6 + i) * F:(7 + i) * F], out[(9 + i) * F:(10 + i) * F])


_MODE_CODE = {Mode.UNI: _UNI, Mode.LOWB: _LOWB, Mode.BIN: _BIN}


def _c128(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.complex128)


def log_magnitude(frame: FrameSpectrum, mic: int) -> np.ndarray:
    """``clip(log10(|Y| + 1e-7) / 7, -1, 1)`` for one microphone."""
    z = _c128(frame.data[mic])
    out = np.empty(z.shape[0])
    _logmag_into(z, out)
    return out


def ipd_features(frame: FrameSpectrum, mic_a: int, mic_b: int):
    """Return ``(sin, cos)`` of the phase difference ``angle(Y_a) - angle(Y_b)``.

    Bins where either magnitude is below 1e-9 yield ``(0, 1)``.
    """
    if mic_a == mic_b:
        raise ConfigError("IPD needs two distinct microphones")
    a, b = _c128(frame.data[mic_a]), _c128(frame.data[mic_b])
    sin, cos = np.empty(a.shape[0]), np.empty(a.shape[0])
    _ipd_into(a, b, sin, cos)
    return sin, cos


def assemble_features(
    ipsi_frame: FrameSpectrum,
    contra_frame: Optional[FrameSpectrum],
    cfg: FeatureConfig,
    aligned_ipsi_frame: Optional[FrameSpectrum] = None,
) -> FeatureVector:
    """Build the feature vector for one side and one frame.

    In ``lowb`` mode ``contra_frame`` is the transmitted (delayed, quantized)
    contralateral spectrum and ``aligned_ipsi_frame`` the ipsilateral spectrum
    delayed by the same link delay; the binaural IPDs are computed on the
    aligned pair. For ``bin`` mode both sides are synchronous and
    ``aligned_ipsi_frame`` is ignored.
    """
    mode = cfg.mode
    front, rear = cfg.ipsi_mics
    ipsi = _c128(ipsi_frame.data)
    contra = aligned = ipsi
    if mode is not Mode.UNI:
        if contra_frame is None:
            raise ConfigError(f"{mode.value} mode needs a contralateral frame")
        contra = _c128(contra_frame.data)
    if mode is Mode.LOWB:
        if aligned_ipsi_frame is None:
            raise ConfigError("lowb mode needs the delay-aligned ipsilateral frame")
        aligned = _c128(aligned_ipsi_frame.data)
    c0, c1 = cfg.contra_mics
    # the kernel does no bounds checking
    if ipsi.ndim != 2 or max(front, rear) >= ipsi.shape[0] or min(front, rear) < 0:
        raise ConfigError(f"ipsilateral frame of shape {ipsi.shape} lacks mics {cfg.ipsi_mics}")
    for name, arr, idx in (("contralateral", contra, (c0, c1)), ("aligned", aligned, (front, rear))):
        if arr.ndim != 2 or arr.shape[1] != ipsi.shape[1] or max(idx) >= arr.shape[0] or min(idx) < 0:
            raise ConfigError(f"{name} frame of shape {arr.shape} does not fit mics {idx}")
    values = np.empty(feature_length(mode, ipsi.shape[1]))
    _assemble(_MODE_CODE[mode], ipsi, contra, aligned, front, rear, c0, c1, values)
    return FeatureVector(values, ipsi_frame.frame_index)
