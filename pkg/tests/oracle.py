"""Naive nested-loop references used as oracles.

Everything here enumerates windows explicitly and accumulates in float64,
independent of the package's gather-table kernels. Slow by design; tests
keep the shapes small.
"""

import numpy as np


def out_extent(extent, kernel, stride, pad):
    return (extent + 2 * pad - kernel) // stride + 1


def window_min_max(x, w, stride, pad):
    """Per-channel window extremes by brute-force enumeration.

    Returns (mins, maxs), each [N, C_out, C_in, *out_spatial] float64.
    Padded source positions are skipped.
    """
    n, ci = x.shape[:2]
    co = w.shape[0]
    spatial = x.shape[2:]
    kernel = w.shape[2:]
    outs = tuple(out_extent(i, k, s, p)
                 for i, k, s, p in zip(spatial, kernel, stride, pad))
    mins = np.full((n, co, ci) + outs, np.inf)
    maxs = np.full((n, co, ci) + outs, -np.inf)

    # precompute valid (source, kernel offset) pairs per output position
    positions = []
    for pos in np.ndindex(*outs):
        pairs = []
        for koff in np.ndindex(*kernel):
            src = tuple(p * s - pd + k
                        for p, s, pd, k in zip(pos, stride, pad, koff))
            if all(0 <= t < e for t, e in zip(src, spatial)):
                pairs.append((src, koff))
        positions.append((pos, pairs))

    for b in range(n):
        for o in range(co):
            for c in range(ci):
                for pos, pairs in positions:
                    cands = [float(x[(b, c) + src]) + float(w[(o, c) + koff])
                             for src, koff in pairs]
                    if cands:
                        mins[(b, o, c) + pos] = min(cands)
                        maxs[(b, o, c) + pos] = max(cands)
    return mins, maxs


def aggregate(per_channel, cmode):
    if cmode == "sum":
        return per_channel.sum(axis=2)
    if cmode == "max":
        return per_channel.max(axis=2)
    return per_channel.min(axis=2)


def tropical_conv(x, w, stride, pad, wmode, cmode):
    mins, maxs = window_min_max(x, w, stride, pad)
    return aggregate(mins if wmode == "min" else maxs, cmode)


def _mix(mins, maxs, alpha, beta):
    shape = (1,) + alpha.T.shape + (1,) * (mins.ndim - 3)
    return (alpha.T.reshape(shape) * mins + beta.T.reshape(shape) * maxs).sum(axis=2)


def compound_conv(x, w, alpha, beta, stride, pad):
    """alpha, beta: [C_in, C_out]; one kernel, mixed extremes, summed."""
    mins, maxs = window_min_max(x, w, stride, pad)
    return _mix(mins, maxs, alpha, beta)


def parallel_conv(x, w1, w2, alpha, beta, stride, pad):
    mins, _ = window_min_max(x, w1, stride, pad)
    _, maxs = window_min_max(x, w2, stride, pad)
    return _mix(mins, maxs, alpha, beta)


def standard_conv(x, w, bias, stride, pad):
    """Cross-correlation with zero padding, float64 accumulation."""
    n, ci = x.shape[:2]
    co = w.shape[0]
    spatial = x.shape[2:]
    kernel = w.shape[2:]
    outs = tuple(out_extent(i, k, s, p)
                 for i, k, s, p in zip(spatial, kernel, stride, pad))
    y = np.zeros((n, co) + outs)
    for b in range(n):
        for o in range(co):
            for pos in np.ndindex(*outs):
                acc = float(bias[o])
                for c in range(ci):
                    for koff in np.ndindex(*kernel):
                        src = tuple(p * s - pd + k
                                    for p, s, pd, k in zip(pos, stride, pad, koff))
                        if all(0 <= t < e for t, e in zip(src, spatial)):
                            acc += float(x[(b, c) + src]) * float(w[(o, c) + koff])
                y[(b, o) + pos] = acc
    return y


def avg_pool(x, window, stride):
    n, c = x.shape[:2]
    spatial = x.shape[2:]
    outs = tuple(out_extent(i, k, s, 0) for i, k, s in zip(spatial, window, stride))
    y = np.zeros((n, c) + outs)
    for b in range(n):
        for ch in range(c):
            for pos in np.ndindex(*outs):
                vals = []
                for koff in np.ndindex(*window):
                    src = tuple(p * s + k for p, s, k in zip(pos, stride, koff))
                    vals.append(float(x[(b, ch) + src]))
                y[(b, ch) + pos] = sum(vals) / len(vals)
    return y
