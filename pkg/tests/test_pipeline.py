import numpy as np
import pytest

from tdcnet.errors import ConfigurationError
from tdcnet.model import NetworkSpec, Tensor3, conv_layer
from tdcnet.pipeline import StreamStats, infer, infer_streaming
from tdcnet.quant import QFormat, _inference_convs
from tdcnet.reference import (bicubic_upscale_plane, conv2d, depth_to_space,
                              rgb_to_ycbcr, ycbcr_to_rgb)

from conftest import random_net

Q13 = QFormat(13, 9)


class TestInfer:
    def test_identity_conv_passthrough(self, rng):
        net = NetworkSpec((conv_layer(1, 1, 1, np.ones((1, 1, 1, 1))),))
        img = rng.integers(0, 256, (5, 7)).astype(np.uint8)
        assert np.array_equal(infer(img, net, 1), img)

    def test_matches_manual_composition(self, rng):
        net = random_net(rng, scale=2, kd=5, depth=2)
        img = rng.integers(0, 256, (8, 8)).astype(np.uint8)
        out = infer(img, net, 2)
        cur = Tensor3((img.astype(np.float64) / 255.0)[None])
        for conv, dts in _inference_convs(net):
            cur = conv2d(cur, conv)
            if dts:
                cur = depth_to_space(cur, dts)
        manual = np.clip(np.rint(cur.data[0] * 255.0), 0, 255).astype(np.uint8)
        assert np.array_equal(out, manual)

    def test_rgb_chroma_path(self, rng):
        net = random_net(rng, scale=2, depth=1)
        img = rng.integers(0, 256, (6, 6, 3)).astype(np.uint8)
        out = infer(img, net, 2)
        assert out.shape == (12, 12, 3)
        y, cb, cr = rgb_to_ycbcr(img)
        expect = ycbcr_to_rgb(_luma(net, y),
                              bicubic_upscale_plane(cb, 2),
                              bicubic_upscale_plane(cr, 2))
        assert np.array_equal(out, expect)

    def test_wrong_scale(self, rng):
        with pytest.raises(ConfigurationError):
            infer(np.zeros((4, 4), dtype=np.uint8), random_net(rng, scale=2), 3)

    def test_requires_uint8(self, rng):
        with pytest.raises(ConfigurationError):
            infer(np.zeros((4, 4)), random_net(rng, scale=2), 2)

    def test_output_dimensions(self, rng):
        for s in (2, 3):
            net = random_net(rng, scale=s)
            img = rng.integers(0, 256, (5, 6)).astype(np.uint8)
            assert infer(img, net, s).shape == (5 * s, 6 * s)


def _luma(net, y_plane):
    from tdcnet.quant import float_forward
    out = float_forward(net, Tensor3((y_plane / 255.0)[None]))
    return np.clip(np.rint(out.data[0] * 255.0), 0.0, 255.0)


class TestStreaming:
    def test_equals_batch_float(self, rng):
        for _ in range(8):
            net = random_net(rng)
            img = rng.integers(0, 256, (int(rng.integers(1, 8)),
                                        int(rng.integers(2, 8)))).astype(np.uint8)
            assert np.array_equal(infer_streaming(img, net, 2),
                                  infer(img, net, 2))

    def test_equals_batch_fixed_bitwise(self, rng):
        for _ in range(8):
            net = random_net(rng)
            img = rng.integers(0, 256, (int(rng.integers(1, 8)),
                                        int(rng.integers(2, 8)))).astype(np.uint8)
            a = infer_streaming(img, net, 2, mode="fixed",
                                q_weights=Q13, q_activations=Q13)
            b = infer(img, net, 2, mode="fixed",
                      q_weights=Q13, q_activations=Q13)
            assert np.array_equal(a, b)

    def test_one_row_image(self, rng):
        net = random_net(rng, scale=2)
        img = rng.integers(0, 256, (1, 9)).astype(np.uint8)
        assert np.array_equal(infer_streaming(img, net, 2), infer(img, net, 2))

    def test_rgb(self, rng):
        net = random_net(rng, scale=2)
        img = rng.integers(0, 256, (5, 4, 3)).astype(np.uint8)
        assert np.array_equal(infer_streaming(img, net, 2), infer(img, net, 2))

    def test_peak_buffering_matches_plan(self, rng):
        net = random_net(rng, scale=2, depth=3)
        img = rng.integers(0, 256, (6, 7)).astype(np.uint8)
        stats = StreamStats()
        infer_streaming(img, net, 2, stats=stats)
        convs = _inference_convs(net)
        w = img.shape[1]
        expected = {}
        idx = 0
        for i, (conv, dts) in enumerate(convs):
            fused = conv.kernel == 1 and i > 0
            expected[idx] = 0 if fused else conv.kernel * w * conv.in_maps
            idx += 1
            if dts:
                idx += 1
        assert stats.peak_samples == expected
