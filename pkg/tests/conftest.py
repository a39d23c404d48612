import numpy as np
import pytest

from tdcnet.model import (ConvLayerSpec, DeconvLayerSpec, FsrcnnConfig,
                          NetworkSpec, WeightSet, conv_layer, save_weights)


def random_deconv(rng, kd, s, m=None, n=None, lo=-16, hi=17) -> DeconvLayerSpec:
    """Integer-valued deconv layer; integer data keeps float arithmetic exact."""
    m = m if m is not None else int(rng.integers(1, 4))
    n = n if n is not None else int(rng.integers(1, 4))
    return DeconvLayerSpec(
        kd, s, m, n,
        rng.integers(lo, hi, size=(m, n, kd, kd)).astype(float),
        rng.integers(lo, hi, size=m).astype(float),
    )


def random_net(rng, scale=2, kd=None, depth=None) -> NetworkSpec:
    """Small random conv chain ending in a deconv, weights scaled for stability."""
    kd = kd if kd is not None else int(rng.integers(scale, scale + 4))
    depth = depth if depth is not None else int(rng.integers(1, 4))
    widths = [1] + [int(rng.integers(1, 5)) for _ in range(depth)]
    layers = []
    for i in range(depth):
        k = int(rng.choice([1, 3, 5]))
        m, n = widths[i + 1], widths[i]
        layers.append(conv_layer(
            k, m, n,
            rng.normal(0, 0.3, (m, n, k, k)) / (n * k * k) ** 0.5,
            rng.normal(0, 0.05, m),
            np.abs(rng.normal(0, 0.25, m)),
        ))
    n = widths[-1]
    layers.append(DeconvLayerSpec(
        kd, scale, 1, n,
        rng.normal(0, 0.3, (1, n, kd, kd)) / (n * kd) ** 0.5,
        rng.normal(0, 0.05, 1),
    ))
    return NetworkSpec(tuple(layers))


def random_weight_doc(rng, x=4, y=2, z=1, kd=5, scales=(2,)) -> dict:
    cfg = FsrcnnConfig(x, y, z, kd, frozenset(scales))
    from tdcnet.model import _conv_shapes
    convs = []
    for k, m, n in _conv_shapes(cfg):
        convs.append(conv_layer(
            k, m, n,
            rng.normal(0, 0.2, (m, n, k, k)),
            rng.normal(0, 0.05, m),
            np.abs(rng.normal(0, 0.2, m)),
        ))
    by_scale = {}
    for s in scales:
        by_scale[s] = DeconvLayerSpec(
            kd, s, 1, x, rng.normal(0, 0.1, (1, x, kd, kd)), rng.normal(0, 0.05, 1)
        )
    names = tuple(f"conv{i + 1}" for i in range(len(convs)))
    return save_weights(WeightSet(cfg, names, tuple(convs), by_scale))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
