"""Floating-point oracle implementations of every primitive the models rely on.

These are the ground truth the transformed/scheduled/quantized paths are checked
against. Per-pixel summation order is fixed (input map outer, kernel row, kernel
column inner) so results are bit-identical across runs regardless of layout.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError
from .model import ConvLayerSpec, DeconvLayerSpec, Tensor3


def conv2d(x: Tensor3, layer: ConvLayerSpec) -> Tensor3:
    """Stride-1 zero-padded convolution preserving spatial size.

    Applies bias always and PReLU only when the layer carries slopes.
    """
    if x.channels != layer.in_maps:
        raise DimensionError(f"input channels {x.channels} != layer in_maps {layer.in_maps}")
    n_in, h, w = x.data.shape
    k, m = layer.kernel, layer.out_maps
    padded = np.zeros((n_in, h + k - 1, w + k - 1))
    pb = layer.pad_before
    padded[:, pb:pb + h, pb:pb + w] = x.data
    out = np.empty((m, h, w))
    wt = layer.weights
    for om in range(m):
        acc = np.full((h, w), layer.bias[om])
        for n in range(n_in):
            for ky in range(k):
                for kx in range(k):
                    acc = acc + wt[om, n, ky, kx] * padded[n, ky:ky + h, kx:kx + w]
        out[om] = acc
    result = Tensor3(out)
    if layer.prelu_slope is not None:
        result = prelu(result, layer.prelu_slope)
    return result


def deconv2d_canvas(x: Tensor3, layer: DeconvLayerSpec) -> Tensor3:
    """Brute-force transposed convolution onto the full accumulation canvas.

    Canvas size is (H-1)*S + K per axis; every input pixel scatters a K x K
    block at stride S and overlapping contributions accumulate. Bias is *not*
    added here; callers add it per cropped-output pixel.
    """
    if x.channels != layer.in_maps:
        raise DimensionError(f"input channels {x.channels} != layer in_maps {layer.in_maps}")
    n_in, h, w = x.data.shape
    k, s, m = layer.kernel, layer.scale, layer.out_maps
    ch = (h - 1) * s + k
    cw = (w - 1) * s + k
    canvas = np.zeros((m, ch, cw))
    wt = layer.weights
    for om in range(m):
        for n in range(n_in):
            for ky in range(k):
                for kx in range(k):
                    canvas[om, ky:ky + (h - 1) * s + 1:s, kx:kx + (w - 1) * s + 1:s] += (
                        wt[om, n, ky, kx] * x.data[n]
                    )
    return Tensor3(canvas)


def canvas_window(canvas: Tensor3, offset: int, out_h: int, out_w: int) -> Tensor3:
    """Window of the canvas starting at (offset, offset), zero-extended outside."""
    out = np.zeros((canvas.channels, out_h, out_w))
    ch, cw = canvas.height, canvas.width
    y0, y1 = max(offset, 0), min(offset + out_h, ch)
    x0, x1 = max(offset, 0), min(offset + out_w, cw)
    if y0 < y1 and x0 < x1:
        out[:, y0 - offset:y1 - offset, x0 - offset:x1 - offset] = canvas.data[:, y0:y1, x0:x1]
    return Tensor3(out)


def depth_to_space(t: Tensor3, scale: int) -> Tensor3:
    """Move the S x S block phase out of the channel dimension.

    Input channel S^2*m + S*yo + xo at (Y, X) lands on output channel m at
    (S*Y + yo, S*X + xo).
    """
    s = scale
    c, h, w = t.data.shape
    if c % (s * s) != 0:
        raise DimensionError(f"channels {c} not divisible by scale^2 = {s * s}")
    m = c // (s * s)
    blocks = t.data.reshape(m, s, s, h, w)          # (m, yo, xo, Y, X)
    out = blocks.transpose(0, 3, 1, 4, 2).reshape(m, h * s, w * s)
    return Tensor3(out)


def space_to_depth(t: Tensor3, scale: int) -> Tensor3:
    """Inverse of depth_to_space."""
    s = scale
    m, h, w = t.data.shape
    if h % s != 0 or w % s != 0:
        raise DimensionError(f"spatial size {h}x{w} not divisible by scale {s}")
    blocks = t.data.reshape(m, h // s, s, w // s, s).transpose(0, 2, 4, 1, 3)
    return Tensor3(blocks.reshape(m * s * s, h // s, w // s))


def prelu(t: Tensor3, slopes) -> Tensor3:
    """f(v) = v for v >= 0 else slope_c * v, one slope per channel."""
    slopes = np.asarray(slopes, dtype=np.float64)
    if slopes.size != t.channels:
        raise DimensionError(f"slope count {slopes.size} != channels {t.channels}")
    d = t.data
    out = np.where(d >= 0, d, slopes[:, None, None] * d)
    return Tensor3(out)


def _cubic_kernel(d: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic interpolation kernel, evaluated at absolute distances d."""
    d = np.abs(d)
    near = (a + 2) * d ** 3 - (a + 3) * d ** 2 + 1
    far = a * d ** 3 - 5 * a * d ** 2 + 8 * a * d - 4 * a
    return np.where(d <= 1, near, np.where(d < 2, far, 0.0))


def _bicubic_axis(plane: np.ndarray, scale: int, axis: int) -> np.ndarray:
    if scale == 1:
        return plane.copy()
    size = plane.shape[axis]
    dst = np.arange(size * scale)
    src = (dst + 0.5) / scale - 0.5          # half-pixel-center alignment
    base = np.floor(src).astype(int)
    out_shape = list(plane.shape)
    out_shape[axis] = size * scale
    out = np.zeros(out_shape)
    for tap in (-1, 0, 1, 2):
        idx = np.clip(base + tap, 0, size - 1)  # clamp-to-edge sampling
        wgt = _cubic_kernel(src - (base + tap))
        taken = np.take(plane, idx, axis=axis)
        shape = [1] * plane.ndim
        shape[axis] = -1
        out += wgt.reshape(shape) * taken
    return out


def bicubic_upscale(plane: Tensor3, scale: int) -> Tensor3:
    """Separable Keys bicubic (a = -0.5) upscale of a single-channel plane."""
    if plane.channels != 1:
        raise DimensionError("bicubic_upscale expects a single-channel plane")
    if scale < 1:
        raise DimensionError("scale must be >= 1")
    out = _bicubic_axis(_bicubic_axis(plane.data[0], scale, 0), scale, 1)
    return Tensor3(out[None])


def bicubic_upscale_plane(plane: np.ndarray, scale: int) -> np.ndarray:
    """2-D array convenience wrapper around bicubic_upscale."""
    return bicubic_upscale(Tensor3(np.asarray(plane, dtype=np.float64)[None]), scale).data[0]


# ITU-R BT.601 studio swing (Y in [16,235], Cb/Cr in [16,240])
_KR, _KG, _KB = 0.299, 0.587, 0.114


def rgb_to_ycbcr(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """8-bit RGB (H, W, 3) to real-valued studio-swing Y/Cb/Cr planes."""
    rgb = np.asarray(img, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"expected (H, W, 3) RGB image, got {rgb.shape}")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y_full = _KR * r + _KG * g + _KB * b
    y = 16.0 + (219.0 / 255.0) * y_full
    cb = 128.0 + (112.0 / 255.0) * (b - y_full) / (1.0 - _KB)
    cr = 128.0 + (112.0 / 255.0) * (r - y_full) / (1.0 - _KR)
    y = np.clip(y, 16.0, 235.0)
    cb = np.clip(cb, 16.0, 240.0)
    cr = np.clip(cr, 16.0, 240.0)
    return y, cb, cr


def ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_ycbcr, rounded and clamped to 8-bit RGB."""
    y_full = (np.asarray(y, dtype=np.float64) - 16.0) * (255.0 / 219.0)
    r = y_full + (np.asarray(cr, dtype=np.float64) - 128.0) * (1.0 - _KR) * (255.0 / 112.0)
    b = y_full + (np.asarray(cb, dtype=np.float64) - 128.0) * (1.0 - _KB) * (255.0 / 112.0)
    g = (y_full - _KR * r - _KB * b) / _KG
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def psnr(a, b, border: int = 0) -> float:
    """10*log10(255^2 / MSE) on 8-bit-scaled samples, border cropped on all sides."""
    da = a.data if isinstance(a, Tensor3) else np.asarray(a, dtype=np.float64)
    db = b.data if isinstance(b, Tensor3) else np.asarray(b, dtype=np.float64)
    if da.shape != db.shape:
        raise DimensionError(f"shape mismatch {da.shape} vs {db.shape}")
    if border > 0:
        da = da[..., border:-border, border:-border]
        db = db[..., border:-border, border:-border]
        if da.size == 0:
            raise DimensionError("border crop removed the whole image")
    mse = float(np.mean((da - db) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)
