"""Window-reduction kernels with a compiled core and a numpy fallback.

The hot inner loops (tropical min/max window reductions and their scatter
backward) live in the Cython extension ``tcnn.kernels._native``. When the
extension is unavailable, or ``TCNN_FORCE_NUMPY=1`` is set, a vectorized
numpy implementation with identical semantics is used instead. Both
backends consume the same precomputed gather table, accumulate backward
sums in float64 before casting to float32, and break ties on the first
(lowest) flat kernel index, so results agree bit-for-bit.

A gather table maps (output position, flat kernel index) to the flat input
spatial offset, with -1 marking padded offsets. Tropical reductions skip
padded offsets entirely; standard convolution reads them as 0.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from ..errors import ShapeError

MODE_MIN = 0
MODE_MAX = 1

from . import numpy_backend

try:  # compiled core is optional at runtime
    from . import _native
except ImportError:  # pragma: no cover - depends on build environment
    _native = None

if _native is not None and os.environ.get("TCNN_FORCE_NUMPY", "") != "1":
    active = _native
else:
    active = numpy_backend


def backend_name() -> str:
    return "native" if active is _native else "numpy"


def native_available() -> bool:
    return _native is not None


def out_extent(in_extent: int, kernel: int, stride: int, pad: int) -> int:
    ext = (in_extent + 2 * pad - kernel) // stride + 1
    if ext < 1:
        raise ShapeError(
            f"window of size {kernel} (stride {stride}, pad {pad}) produces no "
            f"output for input extent {in_extent}"
        )
    return ext


def out_spatial(in_spatial, kernel, stride, pad) -> tuple[int, ...]:
    if not (len(in_spatial) == len(kernel) == len(stride) == len(pad)):
        raise ShapeError("spatial rank mismatch between input and window parameters")
    return tuple(
        out_extent(i, k, s, p) for i, k, s, p in zip(in_spatial, kernel, stride, pad)
    )


@lru_cache(maxsize=256)
def gather_table(in_spatial: tuple, kernel: tuple, stride: tuple, pad: tuple) -> np.ndarray:
    """int64 table [P, K]: flat input offset per (output position, kernel offset).

    P and K enumerate output positions and kernel offsets in row-major
    order. Entries are -1 where the kernel offset falls in the padding.
    """
    outs = out_spatial(in_spatial, kernel, stride, pad)
    ndim = len(in_spatial)

    # per-axis source coordinate: out*stride - pad + k, shape [P_axis, K_axis]
    per_axis = []
    valid = []
    for ax in range(ndim):
        o = np.arange(outs[ax], dtype=np.int64)[:, None]
        k = np.arange(kernel[ax], dtype=np.int64)[None, :]
        src = o * stride[ax] - pad[ax] + k
        per_axis.append(src)
        valid.append((src >= 0) & (src < in_spatial[ax]))

    table = np.zeros((1, 1), dtype=np.int64)
    ok = np.ones((1, 1), dtype=bool)
    for ax in range(ndim):
        table = (
            table[:, None, :, None] * in_spatial[ax]
            + per_axis[ax][None, :, None, :]
        ).reshape(table.shape[0] * outs[ax], table.shape[1] * kernel[ax])
        ok = (ok[:, None, :, None] & valid[ax][None, :, None, :]).reshape(table.shape)
    table[~ok] = -1
    table.setflags(write=False)
    return table


# ---------------------------------------------------------------------------
# Shared dense helpers (standard convolution / pooling), built on the same
# gather table. These ride on BLAS rather than the compiled core.
# ---------------------------------------------------------------------------

def im2col(x: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Gather [N, C, S] into window columns [N, C, P, K]; padding reads 0."""
    cols = x[:, :, table.clip(min=0)]
    if (table < 0).any():
        cols[:, :, table < 0] = 0.0
    return cols


def col2im(gcols: np.ndarray, table: np.ndarray, s_in: int) -> np.ndarray:
    """Scatter-add window-column grads [N, C, P, K] back to [N, C, S]."""
    n, c, p, k = gcols.shape
    valid = table >= 0
    flat_nc = np.arange(n * c, dtype=np.int64)[:, None] * s_in
    idx = (flat_nc + table.reshape(-1)[None, :]).reshape(n, c, p, k)
    acc = np.bincount(
        idx[:, :, valid].ravel(),
        weights=gcols[:, :, valid].ravel().astype(np.float64),
        minlength=n * c * s_in,
    )
    return acc.astype(np.float32).reshape(n, c, s_in)
