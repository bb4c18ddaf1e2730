"""Vectorized numpy fallback for the window-reduction kernels.

Mirrors the compiled core exactly: first-lowest kernel index wins ties,
fully padded windows are flagged with arg -1 and an infinite sentinel
value, and backward accumulation happens in float64 in ascending flat
index order before the final cast to float32.
"""

from __future__ import annotations

import numpy as np

MODE_MIN = 0
MODE_MAX = 1


def _gather(x: np.ndarray, table: np.ndarray, fill: float) -> np.ndarray:
    """Window values [N, C, P, K] with padded offsets replaced by ``fill``."""
    cols = x[:, :, table.clip(min=0)]
    masked = table < 0
    if masked.any():
        cols[:, :, masked] = fill
    return cols


def window_reduce(x, w, table, mode):
    """Reduce each window of x + w; returns (values, winning kernel index).

    x: float32 [N, C_in, S]; w: float32 [C_out, C_in, K]; table: int64 [P, K].
    Output values are [N, C_out, C_in, P] float32, args are int32 with -1
    for windows whose every offset is padded.
    """
    n, ci, _ = x.shape
    co = w.shape[0]
    p, _ = table.shape
    fill = np.inf if mode == MODE_MIN else -np.inf
    cols = _gather(x, table, np.float32(fill))

    vals = np.empty((n, co, ci, p), dtype=np.float32)
    args = np.empty((n, co, ci, p), dtype=np.int32)
    for o in range(co):
        s = cols + w[o][:, None, :]
        a = s.argmin(axis=-1) if mode == MODE_MIN else s.argmax(axis=-1)
        vals[:, o] = np.take_along_axis(s, a[..., None], axis=-1)[..., 0]
        args[:, o] = a.astype(np.int32)

    dead = ~(table >= 0).any(axis=1)
    if dead.any():
        args[:, :, :, dead] = -1
        vals[:, :, :, dead] = np.float32(fill)
    return vals, args


def compound_reduce(x, w, table):
    """Min and max window reductions in one pass over the shared sums."""
    n, ci, _ = x.shape
    co = w.shape[0]
    p, _ = table.shape
    cols_min = _gather(x, table, np.float32(np.inf))
    masked = table < 0
    minvals = np.empty((n, co, ci, p), dtype=np.float32)
    minargs = np.empty((n, co, ci, p), dtype=np.int32)
    maxvals = np.empty((n, co, ci, p), dtype=np.float32)
    maxargs = np.empty((n, co, ci, p), dtype=np.int32)
    for o in range(co):
        s = cols_min + w[o][:, None, :]
        a = s.argmin(axis=-1)
        minvals[:, o] = np.take_along_axis(s, a[..., None], axis=-1)[..., 0]
        minargs[:, o] = a.astype(np.int32)
        if masked.any():
            s[:, :, masked] = np.float32(-np.inf)
        a = s.argmax(axis=-1)
        maxvals[:, o] = np.take_along_axis(s, a[..., None], axis=-1)[..., 0]
        maxargs[:, o] = a.astype(np.int32)

    dead = ~(table >= 0).any(axis=1)
    if dead.any():
        minargs[:, :, :, dead] = -1
        maxargs[:, :, :, dead] = -1
        minvals[:, :, :, dead] = np.float32(np.inf)
        maxvals[:, :, :, dead] = np.float32(-np.inf)
    return minvals, minargs, maxvals, maxargs


def scatter_backward(contrib, args, table, s_in):
    """Route per-(n, c_out, c_in, position) contributions to the winners.

    Returns (grad_x [N, C_in, S], grad_w [C_out, C_in, K]) as float32;
    sums are accumulated in float64. Entries with args < 0 are skipped.
    """
    n, co, ci, p = contrib.shape
    k = table.shape[1]
    valid = args >= 0

    n_idx, co_idx, ci_idx, p_idx = np.indices((n, co, ci, p), sparse=True)
    safe_args = np.where(valid, args, 0).astype(np.int64)

    w_flat = ((co_idx * ci + ci_idx) * k + safe_args).astype(np.int64)
    src = table[p_idx, safe_args]
    x_flat = (n_idx * ci + ci_idx) * np.int64(s_in) + src

    weights = contrib.astype(np.float64)
    gw = np.bincount(w_flat[valid].ravel(), weights=weights[valid].ravel(),
                     minlength=co * ci * k)
    gx = np.bincount(x_flat[valid].ravel(), weights=weights[valid].ravel(),
                     minlength=n * ci * s_in)
    return (gx.astype(np.float32).reshape(n, ci, s_in),
            gw.astype(np.float32).reshape(co, ci, k))
