"""SI-SDR and the spectral losses (cMSE, PCM) evaluated on a 20 ms / 10 ms STFT."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import LOSS_CONFIG, ConfigError, stft

SI_SDR_CAP_DB = 100.0


@dataclass(frozen=True)
class LossWeights:
    compression: float = 0.3
    complex_weight: float = 0.3
    cmse_share: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.compression <= 1.0:
            raise ConfigError("compression must be in (0, 1]")
        if not 0.0 <= self.complex_weight <= 1.0:
            raise ConfigError("complex_weight must be in [0, 1]")


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError(f"expected equal-length mono signals, got {a.shape} and {b.shape}")
    return a, b


def si_sdr(reference, estimate) -> float:
    """Scale-invariant SDR in dB, capped at +100 dB for a vanishing residual."""
    ref, est = _pair(reference, estimate)
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0.0:
        raise ConfigError("reference signal is all zeros")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    target_energy = np.dot(target, target)
    residual = target - est
    res_energy = np.dot(residual, residual)
    if res_energy < 1e-12 * target_energy:
        return SI_SDR_CAP_DB
    if target_energy == 0.0:
        return -np.inf
    return float(10.0 * np.log10(target_energy / res_energy))


def loss_spectrum(x) -> np.ndarray:
    return stft(x, LOSS_CONFIG, dtype=np.float64)


def _compress(X: np.ndarray, c: float):
    mag = np.abs(X)
    magc = mag**c
    unit = np.divide(X, mag, out=np.zeros_like(X), where=mag > 0)
    return magc, magc * unit


def cmse_loss(reference, estimate, w: LossWeights = LossWeights()) -> float:
    """Compressed spectral MSE: complex and magnitude terms blended by ``complex_weight``."""
    ref, est = _pair(reference, estimate)
    mag_r, cpx_r = _compress(loss_spectrum(ref), w.compression)
    mag_e, cpx_e = _compress(loss_spectrum(est), w.compression)
    lam = w.complex_weight
    return float(lam * np.mean(np.abs(cpx_r - cpx_e) ** 2) + (1.0 - lam) * np.mean((mag_r - mag_e) ** 2))


def pcm_loss(mixture, reference, estimate) -> float:
    """Phase-constrained magnitude loss over the speech and the residual noise."""
    ref, est = _pair(reference, estimate)
    mix, _ = _pair(mixture, ref)
    S, S_hat = np.abs(loss_spectrum(ref)), np.abs(loss_spectrum(est))
    N, N_hat = np.abs(loss_spectrum(mix - ref)), np.abs(loss_spectrum(mix - est))
    return float(0.5 * (np.mean((S - S_hat) ** 2) + np.mean((N - N_hat) ** 2)))


def combined_loss(mixture, reference, estimate, w: LossWeights = LossWeights()) -> float:
    a = w.cmse_share
    return a * cmse_loss(reference, estimate, w) + (1.0 - a) * pcm_loss(mixture, reference, estimate)


def evaluate(reference, estimate, mixture=None, w: LossWeights = LossWeights()) -> dict:
    """Per-channel metrics averaged over channels (binaural mean).

    Inputs are ``(samples,)`` or ``(channels, samples)``; ``mixture`` enables
    the PCM and combined losses.
    """
    ref = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    est = np.atleast_2d(np.asarray(estimate, dtype=np.float64))
    if ref.shape != est.shape:
        raise ConfigError(f"reference {ref.shape} and estimate {est.shape} differ")
    rows = {"si_sdr": [], "cmse": []}
    if mixture is not None:
        mix = np.atleast_2d(np.asarray(mixture, dtype=np.float64))
        if mix.shape != ref.shape:
            raise ConfigError(f"mixture {mix.shape} and reference {ref.shape} differ")
        rows["pcm"], rows["combined"] = [], []
    for ch in range(ref.shape[0]):
        rows["si_sdr"].append(si_sdr(ref[ch], est[ch]))
        rows["cmse"].append(cmse_loss(ref[ch], est[ch], w))
        if mixture is not None:
            rows["pcm"].append(pcm_loss(mix[ch], ref[ch], est[ch]))
            rows["combined"].append(w.cmse_share * rows["cmse"][-1] + (1 - w.cmse_share) * rows["pcm"][-1])
    return {k: float(np.mean(v)) for k, v in rows.items()}
