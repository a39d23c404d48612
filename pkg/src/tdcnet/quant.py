"""Signed fixed-point quantization, the quantized forward pass, and the
double-MAC product decomposition.

Conventions:
  * round-half-to-even everywhere, saturation at format limits (never wrap);
  * MACs accumulate in wide integers at scale 2^(wf + af) and are requantized
    to the activation format exactly once per layer output, after bias and
    activation (the default; a per-value truncating mode is not provided);
  * biases are quantized in the weight format and shifted into the accumulator
    scale exactly, adding no extra error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError
from .model import ConvLayerSpec, DeconvLayerSpec, NetworkSpec, Tensor3
from .tdc import transform_weights


@dataclass(frozen=True)
class QFormat:
    """Signed two's-complement fixed point: total_bits wide, frac_bits fractional."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise ConfigurationError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ConfigurationError(
                f"frac_bits must be in [0, total_bits), got {self.frac_bits}"
            )

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits


def quantize_value(v: float, q: QFormat) -> int:
    """Nearest raw code (ties to even), saturated at the format range."""
    raw = int(np.rint(v * (1 << q.frac_bits)))
    return max(q.min_raw, min(q.max_raw, raw))


def quantize_array(a: np.ndarray, q: QFormat) -> np.ndarray:
    raw = np.rint(np.asarray(a, dtype=np.float64) * (1 << q.frac_bits))
    return np.clip(raw, q.min_raw, q.max_raw).astype(np.int64)


def dequantize(raw, q: QFormat):
    return np.asarray(raw, dtype=np.float64) * q.step


def round_half_even_rshift(v: np.ndarray, bits: int) -> np.ndarray:
    """Divide integers by 2**bits, rounding half to even. Exact, vectorized."""
    if bits == 0:
        return np.asarray(v, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    q = v >> bits                      # floor division
    r = v - (q << bits)
    half = 1 << (bits - 1)
    round_up = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + round_up.astype(np.int64)


@dataclass(frozen=True)
class QuantizedLayer:
    """One conv layer in raw-integer form (the deconv appears pre-transformed)."""

    spec: ConvLayerSpec                 # float reference spec (transformed for deconv)
    weights_raw: np.ndarray             # int64 (M, N, K, K) at weight scale
    bias_raw: np.ndarray                # int64 (M,) at accumulator scale wf+af
    prelu_raw: Optional[np.ndarray]     # int64 (M,) at weight scale
    depth_to_space: int                 # 0 for plain conv, else the deconv scale


@dataclass(frozen=True)
class QuantizedNetwork:
    layers: tuple[QuantizedLayer, ...]
    q_weights: QFormat
    q_activations: QFormat


def _inference_convs(net: NetworkSpec) -> list[tuple[ConvLayerSpec, int]]:
    """The network as a pure conv chain: (conv spec, depth-to-space scale)."""
    rows: list[tuple[ConvLayerSpec, int]] = []
    for layer in net.layers:
        if isinstance(layer, DeconvLayerSpec):
            conv, _ = transform_weights(layer)
            rows.append((conv, layer.scale))
        else:
            rows.append((layer, 0))
    return rows


def quantize_network(net: NetworkSpec, q_weights: QFormat,
                     q_activations: QFormat) -> QuantizedNetwork:
    """Quantize all weights, biases and PReLU slopes of the inference chain."""
    qw, qa = q_weights, q_activations
    layers = []
    for conv, dts in _inference_convs(net):
        w_raw = quantize_array(conv.weights, qw)
        # bias at weight precision, left-shifted into the accumulator scale
        b_raw = quantize_array(conv.bias, qw) << qa.frac_bits
        p_raw = None
        if conv.prelu_slope is not None:
            p_raw = quantize_array(conv.prelu_slope, qw)
        layers.append(QuantizedLayer(conv, w_raw, b_raw, p_raw, dts))
    return QuantizedNetwork(tuple(layers), qw, qa)


def quantized_conv_rows(qlayer: QuantizedLayer, padded: np.ndarray,
                        qnet: QuantizedNetwork) -> np.ndarray:
    """Integer conv over a horizontally+vertically padded raw input block.

    `padded` is (N, H + K - 1, W + K - 1) int64; returns (M, H, W) raw
    activations. Shared by the batch and streaming paths so they agree bitwise.
    """
    conv = qlayer.spec
    k, m = conv.kernel, conv.out_maps
    n_in = padded.shape[0]
    h = padded.shape[1] - (k - 1)
    w = padded.shape[2] - (k - 1)
    qw, qa = qnet.q_weights, qnet.q_activations
    out = np.empty((m, h, w), dtype=np.int64)
    for om in range(m):
        acc = np.full((h, w), qlayer.bias_raw[om], dtype=np.int64)
        for n in range(n_in):
            for ky in range(k):
                for kx in range(k):
                    acc = acc + qlayer.weights_raw[om, n, ky, kx] * padded[n, ky:ky + h, kx:kx + w]
        if qlayer.prelu_raw is not None:
            neg = acc < 0
            scaled = round_half_even_rshift(acc * qlayer.prelu_raw[om], qw.frac_bits)
            acc = np.where(neg, scaled, acc)
        act = round_half_even_rshift(acc, qw.frac_bits)
        out[om] = np.clip(act, qa.min_raw, qa.max_raw)
    return out


def quantized_forward(qnet: QuantizedNetwork, x_raw: np.ndarray,
                      collect: bool = False):
    """Run the integer chain on raw input (C, H, W); returns raw output
    (and per-layer raw activations when collect=True)."""
    from .reference import depth_to_space  # local to avoid import cycle

    cur = np.asarray(x_raw, dtype=np.int64)
    trace = []
    for qlayer in qnet.layers:
        conv = qlayer.spec
        if cur.shape[0] != conv.in_maps:
            raise DimensionError(
                f"input channels {cur.shape[0]} != layer in_maps {conv.in_maps}"
            )
        k, pb = conv.kernel, conv.pad_before
        n, h, w = cur.shape
        padded = np.zeros((n, h + k - 1, w + k - 1), dtype=np.int64)
        padded[:, pb:pb + h, pb:pb + w] = cur
        cur = quantized_conv_rows(qlayer, padded, qnet)
        if qlayer.depth_to_space:
            cur = depth_to_space(Tensor3(cur.astype(np.float64)),
                                 qlayer.depth_to_space).data.astype(np.int64)
        if collect:
            trace.append(cur)
    return (cur, trace) if collect else cur


def float_forward(net: NetworkSpec, x: Tensor3, collect: bool = False):
    """Float reference chain matching quantized_forward's structure."""
    from .reference import conv2d, depth_to_space

    cur = x
    trace = []
    for conv, dts in _inference_convs(net):
        cur = conv2d(cur, conv)
        if dts:
            cur = depth_to_space(cur, dts)
        if collect:
            trace.append(cur)
    return (cur, trace) if collect else cur


def fixed_point_error_bound(net: NetworkSpec, qnet: QuantizedNetwork,
                            input_max: float = 1.0,
                            input_err: Optional[float] = None) -> list[float]:
    """Per-layer worst-case |fixed - float| bound by interval propagation.

    Uses the actual quantization residuals of the quantized network, the PReLU
    rescale rounding, and the per-layer requantization step. Valid only while
    no value saturates; raises if the propagated magnitude bound exceeds the
    representable range.
    """
    qw, qa = qnet.q_weights, qnet.q_activations
    if input_err is None:
        input_err = 0.5 * qa.step
    amp = input_max          # bound on |float activation|
    err = input_err          # bound on |fixed - float|
    bounds = []
    for conv, qlayer in zip((c for c, _ in _inference_convs(net)), qnet.layers):
        w = conv.weights
        w_q = dequantize(qlayer.weights_raw, qw)
        b_q = np.asarray(qlayer.bias_raw, dtype=np.float64) * 2.0 ** -(qw.frac_bits + qa.frac_bits)
        dw_sum = np.abs(w - w_q).sum(axis=(1, 2, 3))      # per output map
        wq_sum = np.abs(w_q).sum(axis=(1, 2, 3))
        w_sum = np.abs(w).sum(axis=(1, 2, 3))
        db = np.abs(conv.bias - b_q)
        lin_err = float(np.max(wq_sum * err + dw_sum * amp + db))
        lin_amp = float(np.max(w_sum * amp + np.abs(conv.bias)))
        if conv.prelu_slope is not None:
            s = conv.prelu_slope
            s_q = dequantize(qlayer.prelu_raw, qw)
            lip = float(np.max(np.maximum(1.0, np.abs(s_q))))
            ds = float(np.max(np.abs(s - s_q)))
            act_err = lip * lin_err + ds * lin_amp + 0.5 * 2.0 ** -(qw.frac_bits + qa.frac_bits)
            act_amp = float(np.max(np.maximum(1.0, np.abs(s)))) * lin_amp
        else:
            act_err = lin_err
            act_amp = lin_amp
        err = act_err + 0.5 * qa.step      # final requantization
        amp = act_amp
        if amp + err > qa.max_raw * qa.step:
            raise ConfigurationError(
                f"activation bound {amp + err:.3g} exceeds the representable "
                f"range of {qa}; the error bound would not be valid"
            )
        bounds.append(err)
    return bounds


DOUBLE_MAC_BITS = 13
_DM_LOW = 5                          # unsigned low-part width of the split
_DM_MIN = -(1 << (DOUBLE_MAC_BITS - 1))
_DM_MAX = (1 << (DOUBLE_MAC_BITS - 1)) - 1


def double_mac_product(a, b):
    """13x13-bit product via the three-partial-product DSP-packing identity.

    Splits each operand into a signed high part and an unsigned 5-bit low part:
    a*b = (a_h*b_h) << 10 + (a_l*b_h) << 5 + a*b_l. Equals the direct product
    for every in-range operand pair. Accepts scalars or integer arrays.
    """
    a_arr = np.asarray(a, dtype=np.int64)
    b_arr = np.asarray(b, dtype=np.int64)
    if np.any((a_arr < _DM_MIN) | (a_arr > _DM_MAX)) or np.any((b_arr < _DM_MIN) | (b_arr > _DM_MAX)):
        raise ConfigurationError(
            f"operands must be {DOUBLE_MAC_BITS}-bit signed "
            f"([{_DM_MIN}, {_DM_MAX}])"
        )
    a_h, a_l = a_arr >> _DM_LOW, a_arr & ((1 << _DM_LOW) - 1)
    b_h, b_l = b_arr >> _DM_LOW, b_arr & ((1 << _DM_LOW) - 1)
    result = (a_h * b_h << 2 * _DM_LOW) + (a_l * b_h << _DM_LOW) + a_arr * b_l
    if np.isscalar(a) and np.isscalar(b):
        return int(result)
    return result


def sweep_bitwidth(net: NetworkSpec, images: Sequence[np.ndarray],
                   bits: Sequence[int], scale: int,
                   border: Optional[int] = None) -> list[tuple[int, float]]:
    """Mean PSNR of the fixed-point pipeline against the float pipeline.

    Each bit-width uses frac_bits = total_bits - 4 (sign + 3 integer bits) for
    both weights and activations.
    """
    from .pipeline import infer
    from .reference import psnr

    images = list(images)
    if not images:
        raise ConfigurationError("image set must be non-empty")
    if border is None:
        border = scale
    def _chw(img: np.ndarray) -> np.ndarray:
        # psnr crops the trailing two (spatial) axes; move RGB channels first
        arr = img.astype(np.float64)
        return arr.transpose(2, 0, 1) if arr.ndim == 3 else arr

    float_outputs = [infer(img, net, scale, mode="float") for img in images]
    results = []
    for b in bits:
        q = QFormat(b, b - 4)
        values = []
        for img, ref in zip(images, float_outputs):
            out = infer(img, net, scale, mode="fixed", q_weights=q, q_activations=q)
            values.append(psnr(_chw(out), _chw(ref), border))
        results.append((b, float(np.mean(values))))
    return results
