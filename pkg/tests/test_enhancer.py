import numpy as np
import pytest

from bilateral_se.dsp import ConfigError
from bilateral_se.enhancer import Enhancer, apply_postfilter, apply_spatial, enhance
from bilateral_se.features import Mode
from bilateral_se.link import LinkConfig
from bilateral_se.qnn import ModelHyperparams, init_random, passthrough_weights
from oracles import post_filter, spatial_filter


def cplx(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture(scope="module")
def uni_weights():
    return init_random(ModelHyperparams.for_mode(Mode.UNI), 2, Mode.UNI)


class TestFiltering:
    def test_spatial_oracle(self, rng):
        for _ in range(50):
            Y, W = cplx(rng, (2, 33)), cplx(rng, (2, 33))
            np.testing.assert_allclose(apply_spatial(Y, W), spatial_filter(Y, W), rtol=1e-12)

    def test_postfilter_oracle(self, rng):
        for _ in range(50):
            H, C = cplx(rng, (5, 33)), cplx(rng, (5, 33))
            np.testing.assert_allclose(apply_postfilter(H, C), post_filter(H, C), rtol=1e-12)

    def test_selection_and_zero(self, rng):
        Y = cplx(rng, (2, 33))
        W = np.zeros((2, 33), complex)
        assert not np.any(apply_spatial(Y, W))
        W[0] = 1
        np.testing.assert_array_equal(apply_spatial(Y, W), Y[0])

    def test_single_tap(self, rng):
        H = cplx(rng, (5, 33))
        C = np.zeros((5, 33), complex)
        C[0] = 1
        np.testing.assert_array_equal(apply_postfilter(H, C), H[0])

    def test_shape_errors(self):
        with pytest.raises(ConfigError):
            apply_spatial(np.zeros((2, 33)), np.zeros((3, 33)))
        with pytest.raises(ConfigError):
            apply_postfilter(np.zeros((5, 33)), np.zeros((6, 33)))


class TestPipeline:
    def test_passthrough_delay(self, rng):
        x = rng.standard_normal((4, 1600)) * 0.3
        for mode, link in ((Mode.UNI, None), (Mode.LOWB, LinkConfig(6, 8)), (Mode.BIN, None)):
            out = enhance(passthrough_weights(ModelHyperparams.for_mode(mode), mode), x, mode, link)
            for side, mic in ((0, 0), (1, 2)):
                err = out[side, 32:] - x[mic, :-32].astype(np.float32)
                assert np.sqrt(np.mean(err**2)) < 1e-6
                assert np.max(np.abs(out[side, :32])) < 1e-6

    def test_silence(self, uni_weights):
        out = enhance(uni_weights, np.zeros((4, 320)))
        assert not np.any(out)

    def test_streaming_matches_offline(self, lowb_weights, rng):
        x = rng.standard_normal((4, 480)).astype(np.float32) * 0.2
        link = LinkConfig(4, 8)
        offline = enhance(lowb_weights, x, Mode.LOWB, link)
        eng = Enhancer(lowb_weights, Mode.LOWB, link)
        blocks = [eng.process_block(x[:2, i:i + 16], x[2:, i:i + 16]) for i in range(0, 480, 16)]
        np.testing.assert_array_equal(np.concatenate([b[0] for b in blocks]), offline[0])
        np.testing.assert_array_equal(np.concatenate([b[1] for b in blocks]), offline[1])

    def test_causality(self, lowb_weights, rng):
        x = rng.standard_normal((4, 640)).astype(np.float32) * 0.2
        link = LinkConfig(2, 8)
        base = enhance(lowb_weights, x, Mode.LOWB, link)
        for p in rng.integers(0, 640, 5):
            y = x.copy()
            y[:, p:] = rng.standard_normal((4, 640 - p))
            out = enhance(lowb_weights, y, Mode.LOWB, link)
            np.testing.assert_array_equal(out[:, : p + 1], base[:, : p + 1])

    def test_contra_waits_for_link(self, lowb_weights, rng):
        x = rng.standard_normal((4, 960)).astype(np.float32) * 0.2
        d = 6
        link = LinkConfig(d, 16)
        base = enhance(lowb_weights, x, Mode.LOWB, link)
        p = 300
        y = x.copy()
        y[2:, p:] += 0.3
        out = enhance(lowb_weights, y, Mode.LOWB, link)
        np.testing.assert_array_equal(out[0, : p + 16 * d + 1], base[0, : p + 16 * d + 1])
        assert not np.array_equal(out[0], base[0])

    def test_determinism(self, uni_weights, rng):
        x = rng.standard_normal((4, 320))
        np.testing.assert_array_equal(enhance(uni_weights, x), enhance(uni_weights, x))

    def test_linear_for_fixed_filters(self, rng):
        w = passthrough_weights(ModelHyperparams.for_mode(Mode.UNI), Mode.UNI)
        a, b = rng.standard_normal((2, 4, 480)) * 0.1
        ya, yb, yab = enhance(w, a), enhance(w, b), enhance(w, 2 * a - b)
        np.testing.assert_allclose(yab, 2 * ya - yb, atol=1e-5)

    def test_mode_errors(self, uni_weights, lowb_weights):
        with pytest.raises(ConfigError):
            Enhancer(uni_weights, Mode.LOWB, LinkConfig(4, 8))
        with pytest.raises(ConfigError):
            Enhancer(lowb_weights, Mode.LOWB)
        with pytest.raises(ConfigError):
            enhance(uni_weights, np.zeros((2, 32)))
        eng = Enhancer(uni_weights)
        with pytest.raises(ConfigError):
            eng.process_block(np.zeros((2, 8)), np.zeros((2, 8)))
