import numpy as np
import pytest

from tdcnet.dataflow import (BRAM_BITS, bram_count, ctt_ratio, dsp_count,
                             multiply_count, plan_dataflow, resource_report,
                             search_models)
from tdcnet.errors import ConfigurationError
from tdcnet.model import (DeconvLayerSpec, FsrcnnConfig, NetworkSpec,
                          build_fsrcnn, conv_layer)


def fsrcnn(x, y, z, kd, s=2):
    return build_fsrcnn(FsrcnnConfig(x, y, z, kd, frozenset({s})), s)


class TestCttRatio:
    def test_fully_unrolled(self):
        assert ctt_ratio(12, 12, 3, 3) == 1

    def test_partial(self):
        assert ctt_ratio(12, 4, 3, 3) == 3

    def test_trivial(self):
        assert ctt_ratio(1, 1, 1, 1) == 1


class TestPlanDataflow:
    def test_fsrcnn_word_count(self):
        plan = plan_dataflow(fsrcnn(56, 12, 4, 9), 1920, 32)
        words = plan.total_line_buffer_bits // 32
        assert words == 5 * 1920 * 1 + 4 * (3 * 1920 * 12) + 5 * 1920 * 56
        assert words == 823680

    def test_shrink_layer_fused(self):
        plan = plan_dataflow(fsrcnn(56, 12, 4, 9), 1920, 32)
        shrink = plan.layers[1]
        assert shrink.kernel == 1
        assert not shrink.buffered and shrink.line_buffer_bits == 0
        assert plan.layers[0].combined_with_next

    def test_single_layer_bits(self):
        net = NetworkSpec((conv_layer(3, 1, 1, np.zeros((1, 1, 3, 3))),))
        plan = plan_dataflow(net, 10, 13)
        assert plan.total_line_buffer_bits == 3 * 10 * 1 * 13 == 390

    def test_ratio_one_everywhere(self):
        plan = plan_dataflow(fsrcnn(25, 5, 1, 7), 1440, 13)
        for layer in plan.layers:
            assert ctt_ratio(layer.out_maps, layer.tiling.out_tile,
                             layer.kernel, layer.tiling.kernel_tile) == 1

    def test_deconv_planned_post_transform(self):
        plan = plan_dataflow(fsrcnn(56, 12, 4, 9), 1920, 32)
        dec = plan.layers[-1]
        assert dec.kernel == 5 and dec.out_maps == 4 and dec.in_maps == 56


class TestBramCount:
    def test_32_bit(self):
        assert bram_count(plan_dataflow(fsrcnn(56, 12, 4, 9), 1920, 32)) == 1609

    def test_13_bit(self):
        assert bram_count(plan_dataflow(fsrcnn(56, 12, 4, 9), 1920, 13)) == 654

    def test_empty_network(self):
        assert bram_count(plan_dataflow(NetworkSpec(()), 100, 13)) == 0

    def test_monotone_in_bit_width_and_width(self):
        net = fsrcnn(25, 5, 1, 7)
        for lo, hi in [(8, 16), (13, 32)]:
            assert (bram_count(plan_dataflow(net, 1440, lo))
                    <= bram_count(plan_dataflow(net, 1440, hi)))
        assert (bram_count(plan_dataflow(net, 1280, 13))
                <= bram_count(plan_dataflow(net, 1920, 13)))


class TestMultiplyCount:
    def test_light_fsrcnn(self):
        assert multiply_count(fsrcnn(25, 5, 1, 7)) == 2325

    def test_full_fsrcnn(self):
        assert multiply_count(fsrcnn(56, 12, 4, 9)) == 12464

    def test_empty(self):
        assert multiply_count(NetworkSpec(())) == 0

    def test_deconv_only(self):
        # post-transform multiplies equal the original kernel's weight count
        net = NetworkSpec((DeconvLayerSpec(9, 2, 1, 56,
                                           np.zeros((1, 56, 9, 9)),
                                           np.zeros(1)),))
        assert multiply_count(net) == 81 * 56


class TestDspCount:
    def test_light(self):
        assert dsp_count(2325, 0.7) == 1512

    def test_full(self):
        assert dsp_count(12464, 0.7) == 8102

    def test_endpoints(self):
        assert dsp_count(1000, 0.0) == 1000
        assert dsp_count(1000, 1.0) == 500

    def test_alpha_range(self):
        with pytest.raises(ConfigurationError):
            dsp_count(100, 1.5)


class TestSearchModels:
    def test_known_rows(self):
        got = {(cfg.x, cfg.y, cfg.z): rep.dsp_count
               for cfg, rep in search_models([17, 21, 25, 28], [3, 4, 5],
                                             [1, 4], 7, 2, 0.7)}
        assert got[(17, 5, 4)] == 1514
        assert got[(21, 4, 4)] == 1494
        assert got[(28, 3, 1)] == 1509
        assert got[(25, 5, 1)] == 1512

    def test_budget_filter_and_order(self):
        results = search_models(range(17, 29), [3, 4, 5], [1, 2, 3, 4],
                                7, 2, 0.7, dsp_budget=1540)
        dsps = [rep.dsp_count for _, rep in results]
        assert dsps == sorted(dsps)
        assert all(d <= 1540 for d in dsps)

    def test_empty_range(self):
        with pytest.raises(ConfigurationError):
            search_models([], [1], [1], 7, 2, 0.7)


class TestResourceReport:
    def test_invariant(self):
        rep = resource_report(fsrcnn(25, 5, 1, 7), 0.7, 13, 1440)
        assert rep.dsp_count == dsp_count(rep.multiply_count, rep.alpha)
        assert rep.bram_count == -(-rep.total_line_buffer_bits // BRAM_BITS)
