"""Compound and parallel tropical convolutions.

A compound convolution mixes the min-plus and max-plus responses of one
shared kernel per (input channel, output channel) pair:

    out = sum_ci alpha[ci, co] * minplus(x, w) + beta[ci, co] * maxplus(x, w)

Both responses reduce the same window sums, so the additions are computed
once per window. A parallel convolution feeds two independent kernels, one
per branch, at the cost of a second window-sum pass.

Mixing comes in three flavors: two free coefficient tables (alpha, beta),
one table with beta tied to 1 - alpha, and a fixed form with both
coefficients hard-wired to 1 (no learnable mixing at all). Setting
alpha=1, beta=0 (or alpha=0, beta=1) recovers the pure min-plus-sum
(max-plus-sum) layer exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ShapeError
from .tensor import Tensor
from .tropical import (ArgIndexMap, ConvSpec, WindowMode, _check_backward_contract,
                       _check_conv_shapes, scatter_window_grads, window_reduce)


class MixMode(Enum):
    ONE_PARAM = "1p"
    TWO_PARAM = "2p"
    FIXED_SUM = "fixed"


class MixedKind(Enum):
    COMPOUND = "compound"
    PARALLEL = "parallel"


@dataclass
class MixParams:
    """Learnable mixing coefficients, one per (c_in, c_out) pair."""

    alpha: Tensor
    beta: Tensor | None = None


def effective_coefficients(mix: MixParams | None, mode: MixMode,
                           spec: ConvSpec) -> tuple[np.ndarray, np.ndarray]:
    """Resolve (alpha, beta) arrays of shape [C_in, C_out] for any mode."""
    shape = (spec.in_channels, spec.out_channels)
    if mode is MixMode.FIXED_SUM:
        ones = np.ones(shape, dtype=np.float32)
        return ones, ones
    if mix is None:
        raise ShapeError(f"{mode} mixing requires MixParams")
    if mix.alpha.shape != shape:
        raise ShapeError(f"alpha shape {mix.alpha.shape} != {shape}")
    a = mix.alpha.data
    if mode is MixMode.ONE_PARAM:
        return a, np.float32(1.0) - a
    if mix.beta is None:
        raise ShapeError("two-parameter mixing requires beta")
    if mix.beta.shape != shape:
        raise ShapeError(f"beta shape {mix.beta.shape} != {shape}")
    return a, mix.beta.data


def _mix_and_sum(m: np.ndarray, big: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # [N, C_out, C_in, P] mixed per channel pair, then summed over c_in
    a_t = a.T[None, :, :, None]
    b_t = b.T[None, :, :, None]
    return (a_t * m + b_t * big).sum(axis=2)


def compound_forward(x: Tensor, w: Tensor, mix: MixParams | None,
                     mode: MixMode, spec: ConvSpec):
    """Mixed min/max response of one kernel; window sums are shared.

    Returns (output, min_args, max_args); each ArgIndexMap carries its
    branch's per-channel reduced values for use in backward.
    """
    n, in_spatial, outs = _check_conv_shapes(x, w, spec)
    a, b = effective_coefficients(mix, mode, spec)
    s_in = int(np.prod(in_spatial))
    table = kernels.gather_table(in_spatial, spec.kernel, spec.stride, spec.padding)
    x2 = x.data.reshape(n, spec.in_channels, s_in)
    w2 = w.data.reshape(spec.out_channels, spec.in_channels, spec.kernel_size)
    m, m_args, big, big_args = kernels.active.compound_reduce(x2, w2, table)

    min_amap = ArgIndexMap(kernel_arg=m_args, values=m, spec=spec,
                           wmode=WindowMode.MIN, in_spatial=in_spatial, out_spatial=outs)
    max_amap = ArgIndexMap(kernel_arg=big_args, values=big, spec=spec,
                           wmode=WindowMode.MAX, in_spatial=in_spatial, out_spatial=outs)
    out = _mix_and_sum(m, big, a, b)
    return Tensor(out.reshape((n, spec.out_channels) + outs)), min_amap, max_amap


def parallel_forward(x: Tensor, w1: Tensor, w2: Tensor, mix: MixParams | None,
                     mode: MixMode, spec: ConvSpec):
    """Mixed response of two kernels: min-plus on w1, max-plus on w2."""
    if w1.shape != w2.shape:
        raise ShapeError(f"branch kernels differ in shape: {w1.shape} vs {w2.shape}")
    a, b = effective_coefficients(mix, mode, spec)
    _, min_amap = window_reduce(x, w1, spec, WindowMode.MIN)
    _, max_amap = window_reduce(x, w2, spec, WindowMode.MAX)
    out = _mix_and_sum(min_amap.values, max_amap.values, a, b)
    n = x.shape[0]
    return Tensor(out.reshape((n, spec.out_channels) + min_amap.out_spatial)), min_amap, max_amap


def _mixing_grads(g: np.ndarray, m: np.ndarray, big: np.ndarray, mode: MixMode):
    if mode is MixMode.FIXED_SUM:
        return None, None
    if mode is MixMode.ONE_PARAM:
        ga = np.einsum("nop,noip->io", g, m - big, dtype=np.float64)
        return Tensor(ga.astype(np.float32)), None
    ga = np.einsum("nop,noip->io", g, m, dtype=np.float64)
    gb = np.einsum("nop,noip->io", g, big, dtype=np.float64)
    return Tensor(ga.astype(np.float32)), Tensor(gb.astype(np.float32))


def _branch_contribs(grad_output: Tensor, min_amap: ArgIndexMap, max_amap: ArgIndexMap,
                     mix: MixParams | None, mode: MixMode, spec: ConvSpec):
    _check_backward_contract(grad_output, min_amap, spec, None)
    _check_backward_contract(grad_output, max_amap, spec, None)
    a, b = effective_coefficients(mix, mode, spec)
    n, co = grad_output.shape[0], grad_output.shape[1]
    g = grad_output.data.reshape(n, co, -1)
    g4 = g[:, :, None, :]
    contrib_min = np.ascontiguousarray(a.T[None, :, :, None] * g4, dtype=np.float32)
    contrib_max = np.ascontiguousarray(b.T[None, :, :, None] * g4, dtype=np.float32)
    return g, contrib_min, contrib_max


def compound_backward(grad_output: Tensor, min_args: ArgIndexMap, max_args: ArgIndexMap,
                      m_values: np.ndarray, big_values: np.ndarray,
                      mix: MixParams | None, mode: MixMode, spec: ConvSpec):
    """Gradients for input, shared kernel, and mixing coefficients."""
    g, contrib_min, contrib_max = _branch_contribs(
        grad_output, min_args, max_args, mix, mode, spec)
    gx1, gw1 = scatter_window_grads(contrib_min, min_args)
    gx2, gw2 = scatter_window_grads(contrib_max, max_args)
    grad_input = Tensor(gx1.data + gx2.data)
    grad_weights = Tensor(gw1.data + gw2.data)
    ga, gb = _mixing_grads(g, m_values, big_values, mode)
    return grad_input, grad_weights, ga, gb


def parallel_backward(grad_output: Tensor, min_args: ArgIndexMap, max_args: ArgIndexMap,
                      m_values: np.ndarray, big_values: np.ndarray,
                      mix: MixParams | None, mode: MixMode, spec: ConvSpec):
    """Gradients for input, both branch kernels, and mixing coefficients."""
    g, contrib_min, contrib_max = _branch_contribs(
        grad_output, min_args, max_args, mix, mode, spec)
    gx1, gw1 = scatter_window_grads(contrib_min, min_args)
    gx2, gw2 = scatter_window_grads(contrib_max, max_args)
    grad_input = Tensor(gx1.data + gx2.data)
    ga, gb = _mixing_grads(g, m_values, big_values, mode)
    return grad_input, gw1, gw2, ga, gb
