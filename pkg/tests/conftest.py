import numpy as np
import pytest

from tcnn.tropical import ConvSpec


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_conv_case(rng, dim=None, max_channels=4):
    """Random small (x, w, spec) with at least one output position per axis."""
    if dim is None:
        dim = int(rng.integers(1, 4))
    ci = int(rng.integers(1, max_channels + 1))
    co = int(rng.integers(1, max_channels + 1))
    max_spatial = {1: 8, 2: 8, 3: 5}[dim]
    kernel = tuple(int(rng.integers(1, 4)) for _ in range(dim))
    stride = tuple(int(rng.integers(1, 3)) for _ in range(dim))
    # pad < kernel keeps every window over at least one real element
    pad = tuple(int(rng.integers(0, min(2, k))) for k in kernel)
    spatial = tuple(
        int(rng.integers(max(1, k - 2 * p), max_spatial + 1))
        for k, p in zip(kernel, pad)
    )
    # guarantee at least one valid window
    spatial = tuple(max(s, k - 2 * p) for s, k, p in zip(spatial, kernel, pad))
    n = int(rng.integers(1, 3))
    x = rng.normal(size=(n, ci) + spatial).astype(np.float32)
    w = rng.normal(size=(co, ci) + kernel).astype(np.float32)
    spec = ConvSpec(dim, ci, co, kernel, stride, pad)
    return x, w, spec


@pytest.fixture
def rng():
    return rng_for(20240817)
