import numpy as np
import pytest

from bilateral_se.dsp import ConfigError
from bilateral_se.mixer import SceneSpec, Source, better_ear_snr, convolve_ir, mix_scene
from oracles import convolve_truncated


def rand_ir(rng, taps=64):
    h = rng.standard_normal((4, taps)) * np.exp(-np.arange(taps) / 10)
    return h


def scene(rng, **kw):
    n = 4000
    target = Source(rng.standard_normal(n), rand_ir(rng, 8), rand_ir(rng, 64) * 0.3)
    inter = [Source(rng.standard_normal(n), rand_ir(rng)) for _ in range(2)]
    noise = Source(rng.standard_normal(n), rand_ir(rng))
    return SceneSpec(target, inter, noise, **kw)


def measured_snr(bundle, comp):
    return better_ear_snr(bundle.target_reverberant, comp)


def test_convolve_oracle(rng):
    x = rng.standard_normal(300)
    h = rng.standard_normal((2, 40))
    got = convolve_ir(x, h)
    for m in range(2):
        np.testing.assert_allclose(got[m], convolve_truncated(x, h[m]), atol=1e-10)


class TestBetterEar:
    def test_equal(self, rng):
        t = rng.standard_normal((4, 500))
        assert abs(better_ear_snr(t, t)) < 1e-12

    def test_half_amplitude_one_ear(self, rng):
        t = rng.standard_normal((4, 500))
        c = t.copy()
        c[2:] *= 0.5
        np.testing.assert_allclose(better_ear_snr(t, c), 20 * np.log10(2), atol=1e-12)
        assert abs(20 * np.log10(2) - 6.02) < 0.01

    def test_silent_component(self, rng):
        t = rng.standard_normal((4, 100))
        c = t.copy()
        c[0] = 0
        assert better_ear_snr(t, c) == np.inf


class TestMix:
    def test_requested_snrs(self, rng):
        b = mix_scene(scene(rng, interferer_snr_db=[3.0, -2.5], noise_snr_db=8.0, output_level_dbfs=-30.0, seed=1))
        for comp, want in zip(b.interferers, (3.0, -2.5)):
            assert abs(measured_snr(b, comp) - want) < 0.01
        assert abs(measured_snr(b, b.noise) - 8.0) < 0.01
        level = 10 * np.log10(np.mean(b.mixture**2))
        assert abs(level + 30.0) < 1e-4

    def test_drawn_values_and_additivity(self, rng):
        b = mix_scene(scene(rng, seed=5))
        for comp, want in zip(b.interferers, b.interferer_snr_db):
            assert abs(measured_snr(b, comp) - want) < 0.01
        total = b.target_reverberant.copy()
        for v in b.interferers:
            total += v
        total += b.noise
        np.testing.assert_array_equal(b.mixture, total)
        assert abs(10 * np.log10(np.mean(b.mixture**2)) - b.output_level_dbfs) < 1e-4

    def test_seeded(self):
        a = mix_scene(scene(np.random.default_rng(3), seed=9))
        b = mix_scene(scene(np.random.default_rng(3), seed=9))
        np.testing.assert_array_equal(a.mixture, b.mixture)
        assert a.interferer_snr_db == b.interferer_snr_db

    def test_direct_path_is_subset(self, rng):
        b = mix_scene(scene(rng, seed=2, output_level_dbfs=-20.0))
        assert b.target_direct.shape == b.mixture.shape
        assert not np.array_equal(b.target_direct, b.target_reverberant)

    def test_silent_target(self, rng):
        spec = scene(rng)
        spec.target = Source(np.zeros(4000), rand_ir(rng))
        with pytest.raises(ConfigError):
            mix_scene(spec)
