import numpy as np
import pytest

from tdcnet.errors import ConfigurationError
from tdcnet.model import NetworkSpec, Tensor3, conv_layer
from tdcnet.quant import (QFormat, dequantize, double_mac_product,
                          fixed_point_error_bound, float_forward,
                          quantize_array, quantize_network, quantize_value,
                          quantized_forward, round_half_even_rshift,
                          sweep_bitwidth)

from conftest import random_net

Q13 = QFormat(13, 9)


class TestQFormat:
    def test_range(self):
        assert Q13.min_raw == -4096 and Q13.max_raw == 4095
        assert Q13.step == 2.0 ** -9

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            QFormat(1, 0)
        with pytest.raises(ConfigurationError):
            QFormat(8, 8)


class TestQuantizeValue:
    def test_exact(self):
        assert quantize_value(0.5, Q13) == 256

    def test_third(self):
        raw = quantize_value(1.0 / 3.0, Q13)
        assert raw == 171
        assert dequantize(raw, Q13) == pytest.approx(0.333984375)

    def test_saturation(self):
        assert quantize_value(100.0, Q13) == 4095
        assert quantize_value(-100.0, Q13) == -4096

    def test_half_to_even(self):
        q = QFormat(8, 1)
        assert quantize_value(0.75, q) == 2     # 1.5 -> 2
        assert quantize_value(1.25, q) == 2     # 2.5 -> 2

    def test_roundtrip_error_bound(self, rng):
        v = rng.uniform(-3, 3, 1000)
        err = np.abs(dequantize(quantize_array(v, Q13), Q13) - v)
        assert err.max() <= 2.0 ** -10

    def test_idempotent_on_representable(self, rng):
        raw = rng.integers(Q13.min_raw, Q13.max_raw + 1, 100)
        again = quantize_array(dequantize(raw, Q13), Q13)
        assert np.array_equal(again, raw)


class TestRoundHalfEvenRshift:
    def test_cases(self):
        assert round_half_even_rshift(np.array([5]), 1)[0] == 2     # 2.5 -> 2
        assert round_half_even_rshift(np.array([7]), 1)[0] == 4     # 3.5 -> 4
        assert round_half_even_rshift(np.array([-5]), 1)[0] == -2   # -2.5 -> -2
        assert round_half_even_rshift(np.array([6]), 2)[0] == 2     # 1.5 -> 2

    def test_matches_float_rint(self, rng):
        v = rng.integers(-10000, 10000, 2000)
        got = round_half_even_rshift(v, 4)
        want = np.rint(v / 16.0).astype(np.int64)
        assert np.array_equal(got, want)


class TestQuantizedForward:
    def test_lossless_when_representable(self, rng):
        # weights in 1/16 steps are exact in any format with >= 4 frac bits
        k, m, n = 3, 2, 2
        layer = conv_layer(k, m, n,
                           rng.integers(-8, 9, (m, n, k, k)) / 16.0,
                           rng.integers(-8, 9, m) / 16.0)
        net = NetworkSpec((layer,))
        q = QFormat(24, 12)
        qnet = quantize_network(net, q, q)
        x_raw = (rng.integers(-4, 5, (n, 4, 4)) * (1 << 12)).astype(np.int64)
        out_raw = quantized_forward(qnet, x_raw)
        want = float_forward(net, Tensor3(x_raw * q.step)).data
        assert np.array_equal(out_raw * q.step, want)

    def test_zero_network(self, rng):
        net = NetworkSpec((conv_layer(3, 1, 1, np.zeros((1, 1, 3, 3))),))
        for bits in (8, 13, 16):
            q = QFormat(bits, bits - 4)
            out = quantized_forward(quantize_network(net, q, q),
                                    np.full((1, 3, 3), 7, dtype=np.int64))
            assert not out.any()

    def test_error_within_self_computed_bound(self, rng):
        for _ in range(5):
            net = random_net(rng)
            qnet = quantize_network(net, Q13, Q13)
            bounds = fixed_point_error_bound(net, qnet)
            x = rng.uniform(0, 1, (1, 5, 5))
            x_raw = quantize_array(x, Q13)
            _, fixed_trace = quantized_forward(qnet, x_raw, collect=True)
            _, float_trace = float_forward(net, Tensor3(x_raw * Q13.step),
                                           collect=True)
            for bound, f_raw, f_ref in zip(bounds, fixed_trace, float_trace):
                err = np.abs(f_raw * Q13.step - f_ref.data).max()
                assert err <= bound + 1e-12


class TestDoubleMac:
    def test_zero(self):
        for b in (-4096, -1, 0, 1, 4095):
            assert double_mac_product(0, b) == 0

    def test_square(self):
        assert double_mac_product(4095, 4095) == 16769025

    def test_extreme(self):
        assert double_mac_product(-4096, 4095) == -16773120

    def test_random_pairs(self, rng):
        a = rng.integers(-4096, 4096, 10000)
        b = rng.integers(-4096, 4096, 10000)
        assert np.array_equal(double_mac_product(a, b), a * b)

    def test_out_of_range(self):
        with pytest.raises(ConfigurationError):
            double_mac_product(4096, 0)


class TestSweepBitwidth:
    def test_structural(self, rng):
        net = random_net(rng, depth=1)
        imgs = [rng.integers(0, 256, (8, 8)).astype(np.uint8)]
        res = sweep_bitwidth(net, imgs, [8, 13, 16], 2)
        assert [b for b, _ in res] == [8, 13, 16]

    def test_zero_network_constant_psnr(self, rng):
        from tdcnet.model import DeconvLayerSpec
        net = NetworkSpec((DeconvLayerSpec(4, 2, 1, 1, np.zeros((1, 1, 4, 4)),
                                           np.zeros(1)),))
        imgs = [rng.integers(0, 256, (6, 6)).astype(np.uint8)]
        res = sweep_bitwidth(net, imgs, [8, 13], 2)
        assert res[0][1] == res[1][1]

    def test_empty_images(self, rng):
        with pytest.raises(ConfigurationError):
            sweep_bitwidth(random_net(rng), [], [13], 2)
