"""Rewriting a transposed convolution as S^2 sparse stride-1 convolutions.

A K x K stride-S deconv layer becomes a single conv layer with S^2 times the
output maps and a smaller kernel; interleaving the phase channels back into
S x S blocks (depth_to_space) reproduces the deconvolution output exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, InternalConsistencyError, TdcnetError
from .model import ConvLayerSpec, DeconvLayerSpec, Tensor3, conv_layer
from .reference import canvas_window, conv2d, deconv2d_canvas, depth_to_space


@dataclass(frozen=True)
class TdcGeometry:
    """Derived transform quantities for one (deconv kernel, stride) pair."""

    deconv_kernel: int
    stride: int
    overlap: Fraction            # neighboring blocks overlapping per axis, exact
    conv_kernel: int
    overlap_frac_ge_half: bool
    crop_offset: int             # canvas row/col where the interleaved output starts


@dataclass(frozen=True)
class ZeroAnalysis:
    """Zero-weight accounting for a transformed layer."""

    num_zero: int
    zero_ratio: float
    per_filter_nonzero: tuple[int, ...]   # length S^2, ordered by phase S*yo+xo


def derive_geometry(deconv_kernel: int, stride: int) -> TdcGeometry:
    """Conv kernel size and canvas alignment for the transform.

    The overlap count is kept as an exact rational; the half-overlap branch
    (fraction exactly 0.5, e.g. kernel 7 stride 2) must not be decided by
    floating-point comparison.
    """
    kd, s = deconv_kernel, stride
    if s < 2:
        raise ConfigurationError(f"stride must be >= 2, got {s}")
    if kd < s:
        raise ConfigurationError(f"deconv kernel {kd} must be >= stride {s}")
    overlap = Fraction(kd // 2, s)
    frac = overlap - (overlap.numerator // overlap.denominator)
    ge_half = frac >= Fraction(1, 2)
    if ge_half:
        kc = 2 * -(-overlap.numerator // overlap.denominator)  # 2 * ceil
    else:
        kc = 2 * (overlap.numerator // overlap.denominator) + 1
    crop = kd - s * (kc // 2 + 1) + (1 if ge_half else 0)
    return TdcGeometry(kd, s, overlap, kc, ge_half, crop)


def map_coefficient(geom: TdcGeometry, x_in: int, y_in: int,
                    x_out: int, y_out: int):
    """Deconv weight index feeding input tap (x_in, y_in) for phase (x_out, y_out).

    Returns (x_d, y_d) or None when the tap is a structural zero.
    """
    kd, s, kc = geom.deconv_kernel, geom.stride, geom.conv_kernel
    if not (0 <= x_in < kc and 0 <= y_in < kc and 0 <= x_out < s and 0 <= y_out < s):
        raise ConfigurationError(
            f"indices out of range: in=({x_in},{y_in}) out=({x_out},{y_out}) "
            f"for conv_kernel {kc}, stride {s}"
        )
    shift = 1 if geom.overlap_frac_ge_half else 0
    x_rel = kd + shift - s * x_in
    y_rel = kd + shift - s * y_in
    x_d = x_rel - (s - (x_out % s))
    y_d = y_rel - (s - (y_out % s))
    if 0 <= x_d < kd and 0 <= y_d < kd:
        return x_d, y_d
    return None


def _axis_map(geom: TdcGeometry) -> np.ndarray:
    """Per-axis map[out_phase][in_tap] -> deconv index, or -1 for a zero tap."""
    kd, s, kc = geom.deconv_kernel, geom.stride, geom.conv_kernel
    shift = 1 if geom.overlap_frac_ge_half else 0
    table = np.full((s, kc), -1, dtype=int)
    for o in range(s):
        for i in range(kc):
            d = (kd + shift - s * i) - (s - o)
            if 0 <= d < kd:
                table[o, i] = d
    return table


def zero_analysis(geom: TdcGeometry, out_maps: int, in_maps: int) -> ZeroAnalysis:
    """Structural zero count of the transformed filters."""
    kd, s, kc = geom.deconv_kernel, geom.stride, geom.conv_kernel
    num_zero = (kc * kc * s * s - kd * kd) * out_maps * in_maps
    ratio = num_zero / (kc * kc * s * s * out_maps * in_maps)
    axis = _axis_map(geom)
    counts = (axis >= 0).sum(axis=1)      # valid taps per axis phase
    per_filter = tuple(int(counts[yo] * counts[xo])
                       for yo in range(s) for xo in range(s))
    if sum(per_filter) != kd * kd:
        raise InternalConsistencyError(
            f"per-filter nonzero counts {per_filter} do not sum to {kd * kd}"
        )
    return ZeroAnalysis(num_zero, ratio, per_filter)


def transform_weights(layer: DeconvLayerSpec) -> tuple[ConvLayerSpec, ZeroAnalysis]:
    """Transformed conv layer with S^2 * M output maps plus its zero analysis.

    Output map S^2*m + S*yo + xo holds the phase-(yo, xo) filter of deconv map
    m; every phase map carries bias[m], so the bias lands once per output pixel.
    """
    geom = derive_geometry(layer.kernel, layer.scale)
    s, kc = geom.stride, geom.conv_kernel
    m, n = layer.out_maps, layer.in_maps
    axis = _axis_map(geom)
    wc = np.zeros((s * s * m, n, kc, kc))
    for yo in range(s):
        yd = axis[yo]
        yv = yd >= 0
        for xo in range(s):
            xd = axis[xo]
            xv = xd >= 0
            phase = s * yo + xo
            for yi in np.nonzero(yv)[0]:
                for xi in np.nonzero(xv)[0]:
                    wc[phase::s * s, :, yi, xi] = layer.weights[:, :, yd[yi], xd[xi]]
    # channel order is S^2*m + phase: all S^2 phase maps of m carry bias[m]
    bias = np.repeat(layer.bias, s * s)
    conv = conv_layer(kc, s * s * m, n, wc, bias=bias)
    return conv, zero_analysis(geom, m, n)


def find_crop_offset(layer: DeconvLayerSpec, probe_size: int = 4, seed: int = 0) -> int:
    """Exhaustively locate the canvas window the transformed output corresponds to.

    Runs a random-integer single-map probe of the same (kernel, stride), searches
    offsets in [-K, K] for the unique window matching transformed-conv +
    depth_to_space, and cross-checks the closed-form prediction in the geometry.
    """
    geom = derive_geometry(layer.kernel, layer.scale)
    kd, s = layer.kernel, layer.scale
    rng = np.random.default_rng(seed)
    probe = DeconvLayerSpec(
        kd, s, 1, 1,
        rng.integers(-16, 17, size=(1, 1, kd, kd)).astype(float),
        np.zeros(1),
    )
    x = Tensor3(rng.integers(-16, 17, size=(1, probe_size, probe_size)).astype(float))
    conv, _ = transform_weights(probe)
    produced = depth_to_space(conv2d(x, conv), s)
    canvas = deconv2d_canvas(x, probe)
    out_h, out_w = s * probe_size, s * probe_size
    matches = [
        c for c in range(-kd, kd + 1)
        if np.array_equal(canvas_window(canvas, c, out_h, out_w).data, produced.data)
    ]
    if len(matches) != 1:
        raise InternalConsistencyError(
            f"crop offset search found {len(matches)} matches for "
            f"(kernel={kd}, stride={s}): {matches}"
        )
    if matches[0] != geom.crop_offset:
        raise InternalConsistencyError(
            f"searched crop offset {matches[0]} != closed form {geom.crop_offset} "
            f"for (kernel={kd}, stride={s})"
        )
    return matches[0]


def deconv_via_transform(x: Tensor3, layer: DeconvLayerSpec) -> Tensor3:
    """S*H x S*W deconvolution output via the transform (bias included)."""
    conv, _ = transform_weights(layer)
    return depth_to_space(conv2d(x, conv), layer.scale)


def deconv_oracle(x: Tensor3, layer: DeconvLayerSpec) -> Tensor3:
    """S*H x S*W deconvolution output via the brute-force canvas (bias included)."""
    geom = derive_geometry(layer.kernel, layer.scale)
    canvas = deconv2d_canvas(x, layer)
    win = canvas_window(canvas, geom.crop_offset, layer.scale * x.height,
                        layer.scale * x.width)
    return Tensor3(win.data + layer.bias[:, None, None])
