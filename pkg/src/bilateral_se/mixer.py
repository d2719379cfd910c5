"""Scene mixing from user-supplied source signals and multichannel impulse responses.

SNRs are better-ear values measured on each ear's reference (front) mic
against the reverberant target. Unspecified SNRs and levels are drawn from
the default distributions with a seeded generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .dsp import ConfigError

INTERFERER_SNR_DB = (0.0, 4.1)  # mean, std
NOISE_SNR_DB = (6.2, 4.4)
LEVEL_DBFS = (-26.0, 5.0)
SNR_INF = float("inf")


@dataclass
class Source:
    """Mono ``signal`` with a (mics, taps) impulse response.

    For the target, ``ir`` is the direct part and ``ir_early`` / ``ir_late``
    hold the remaining reverberation (optional).
    """

    signal: np.ndarray
    ir: np.ndarray
    ir_early: Optional[np.ndarray] = None
    ir_late: Optional[np.ndarray] = None

    def full_ir(self) -> np.ndarray:
        parts = [np.atleast_2d(np.asarray(p, dtype=np.float64)) for p in (self.ir, self.ir_early, self.ir_late) if p is not None]
        n = max(p.shape[1] for p in parts)
        out = np.zeros((parts[0].shape[0], n))
        for p in parts:
            if p.shape[0] != out.shape[0]:
                raise ConfigError("impulse-response parts have different mic counts")
            out[:, : p.shape[1]] += p
        return out


@dataclass
class SceneSpec:
    target: Source
    interferers: List[Source] = field(default_factory=list)
    noise: Optional[Source] = None
    interferer_snr_db: Optional[List[Optional[float]]] = None
    noise_snr_db: Optional[float] = None
    output_level_dbfs: Optional[float] = None
    seed: int = 0
    left_mics: Sequence[int] = (0, 1)
    right_mics: Sequence[int] = (2, 3)


@dataclass
class MixtureBundle:
    mixture: np.ndarray  # (mics, samples)
    target_direct: np.ndarray
    target_reverberant: np.ndarray
    interferers: List[np.ndarray]
    noise: Optional[np.ndarray]
    interferer_snr_db: List[float]
    noise_snr_db: Optional[float]
    output_level_dbfs: float


def convolve_ir(signal, ir) -> np.ndarray:
    """Full linear convolution per mic, truncated to the signal length."""
    x = np.asarray(signal, dtype=np.float64)
    h = np.atleast_2d(np.asarray(ir, dtype=np.float64))
    if x.ndim != 1 or x.size == 0 or h.shape[1] == 0:
        raise ConfigError("convolve_ir needs a non-empty mono signal and impulse response")
    return fftconvolve(x[None, :], h, axes=1)[:, : x.size]


def _energy(x: np.ndarray) -> float:
    return float(np.dot(x, x))


def better_ear_snr(target_ref, component, left_mics=(0, 1), right_mics=(2, 3)) -> float:
    """Max over ears of the reference-mic SNR in dB; +inf if either ear's component is silent."""
    t = np.asarray(target_ref, dtype=np.float64)
    c = np.asarray(component, dtype=np.float64)
    if t.shape != c.shape:
        raise ConfigError(f"shapes differ: {t.shape} vs {c.shape}")
    snrs = []
    for mics in (left_mics, right_mics):
        ref = mics[0]
        ec = _energy(c[ref])
        if ec == 0.0:
            return SNR_INF
        snrs.append(10.0 * np.log10(_energy(t[ref]) / ec))
    return float(max(snrs))


def _fit(x: np.ndarray, n: int) -> np.ndarray:
    if x.shape[-1] >= n:
        return x[..., :n]
    return np.concatenate([x, np.zeros(x.shape[:-1] + (n - x.shape[-1],))], axis=-1)


def mix_scene(spec: SceneSpec) -> MixtureBundle:
    """Scale interferers and noise to their better-ear SNRs, then set the mixture level."""
    rng = np.random.default_rng(spec.seed)
    target = np.asarray(spec.target.signal, dtype=np.float64)
    n = target.size
    xs = convolve_ir(target, spec.target.full_ir())
    direct = convolve_ir(target, spec.target.ir)
    l_ref, r_ref = spec.left_mics[0], spec.right_mics[0]
    if _energy(xs[l_ref]) == 0.0 or _energy(xs[r_ref]) == 0.0:
        raise ConfigError("target is silent at a reference mic; SNR is undefined")

    def scaled(src: Source, requested: float):
        comp = convolve_ir(_fit(np.asarray(src.signal, dtype=np.float64), n), src.full_ir())
        if comp.shape != xs.shape:
            raise ConfigError("all impulse responses must share the mic count")
        current = better_ear_snr(xs, comp, spec.left_mics, spec.right_mics)
        if not np.isfinite(current):
            raise ConfigError("component is silent at a reference mic")
        return comp * 10.0 ** ((current - requested) / 20.0)

    requested = list(spec.interferer_snr_db or [None] * len(spec.interferers))
    if len(requested) != len(spec.interferers):
        raise ConfigError("one SNR per interferer is required")
    snrs = [float(rng.normal(*INTERFERER_SNR_DB)) if s is None else float(s) for s in requested]
    interferers = [scaled(src, s) for src, s in zip(spec.interferers, snrs)]

    noise = None
    noise_snr = None
    if spec.noise is not None:
        noise_snr = float(rng.normal(*NOISE_SNR_DB)) if spec.noise_snr_db is None else float(spec.noise_snr_db)
        noise = scaled(spec.noise, noise_snr)

    level = float(rng.normal(*LEVEL_DBFS)) if spec.output_level_dbfs is None else float(spec.output_level_dbfs)
    pre = xs + sum(interferers, np.zeros_like(xs)) + (noise if noise is not None else 0.0)
    rms = np.sqrt(np.mean(pre**2))
    if rms == 0.0:
        raise ConfigError("mixture is silent")
    gain = 10.0 ** (level / 20.0) / rms

    xs = xs * gain
    interferers = [v * gain for v in interferers]
    noise = noise * gain if noise is not None else None
    mixture = xs.copy()
    for v in interferers:
        mixture += v
    if noise is not None:
        mixture += noise
    return MixtureBundle(mixture, direct * gain, xs, interferers, noise, snrs, noise_snr, level)


def load_scene(path, read_wav) -> SceneSpec:
    """Build a :class:`SceneSpec` from a JSON file whose paths are relative to it.

    ``read_wav(path) -> (rate, (channels, samples) array)`` supplies audio.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    base = path.parent

    def audio(p, mono=False):
        _, x = read_wav(base / p)
        if mono:
            if x.shape[0] != 1:
                raise ConfigError(f"{p}: source signals must be mono")
            return x[0]
        return x

    def source(d, is_target=False):
        if is_target and "ir_direct" in d:
            ir = audio(d["ir_direct"])
            early = audio(d["ir_early"]) if "ir_early" in d else None
            late = audio(d["ir_late"]) if "ir_late" in d else None
            if "ir" in d:
                # full IR given: keep the reverberant remainder as one part
                full = audio(d["ir"])
                early = _fit(full, max(full.shape[1], ir.shape[1])) - _fit(ir, max(full.shape[1], ir.shape[1]))
                late = None
            return Source(audio(d["signal"], True), ir, early, late)
        return Source(audio(d["signal"], True), audio(d["ir"]))

    try:
        return SceneSpec(
            target=source(doc["target"], True),
            interferers=[source(d) for d in doc.get("interferers", [])],
            noise=source(doc["noise"]) if doc.get("noise") else None,
            interferer_snr_db=[d.get("snr_db") for d in doc.get("interferers", [])] or None,
            noise_snr_db=(doc.get("noise") or {}).get("snr_db"),
            output_level_dbfs=doc.get("output_level_dbfs"),
            seed=int(doc.get("seed", 0)),
            left_mics=tuple(doc.get("left_mics", (0, 1))),
            right_mics=tuple(doc.get("right_mics", (2, 3))),
        )
    except KeyError as exc:
        raise ConfigError(f"scene spec is missing {exc}") from exc
