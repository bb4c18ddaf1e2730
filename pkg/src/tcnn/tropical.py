"""Tropical convolution operations.

A tropical window reduction slides a kernel over the input and, instead of
a sum of products, takes the min (or max) of elementwise sums
input + weight over the window. Six layer families arise per dimension by
crossing the window mode (min-plus, max-plus) with a channel aggregation
(sum, max, min over input channels).

Padding semantics: padded offsets are excluded from the reduction (mask
semantics, equivalent to a +inf/-inf sentinel). Zero padding would wrongly
win min reductions on positive data, so it is not used here.

Backward passes are sub-gradients: each window routes its entire upstream
gradient to the single recorded winner, like max pooling. Ties resolve to
the first (lowest) flat kernel index, then the lowest input channel, so
training replays deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ContractError, ShapeError
from .tensor import Tensor


class WindowMode(Enum):
    MIN = "min"
    MAX = "max"


class ChannelMode(Enum):
    SUM = "sum"
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a convolution-family layer."""

    dim: int
    in_channels: int
    out_channels: int
    kernel: tuple[int, ...]
    stride: tuple[int, ...]
    padding: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ShapeError(f"dim must be 1, 2 or 3, got {self.dim}")
        object.__setattr__(self, "kernel", tuple(int(k) for k in self.kernel))
        object.__setattr__(self, "stride", tuple(int(s) for s in self.stride))
        object.__setattr__(self, "padding", tuple(int(p) for p in self.padding))
        if not (len(self.kernel) == len(self.stride) == len(self.padding) == self.dim):
            raise ShapeError("kernel/stride/padding must each have dim entries")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be >= 1")
        if any(k < 1 for k in self.kernel):
            raise ShapeError(f"kernel extents must be >= 1, got {self.kernel}")
        if any(s < 1 for s in self.stride):
            raise ShapeError(f"strides must be >= 1, got {self.stride}")
        if any(p < 0 for p in self.padding):
            raise ShapeError(f"padding must be >= 0, got {self.padding}")

    @property
    def kernel_size(self) -> int:
        return int(np.prod(self.kernel))

    def out_spatial(self, in_spatial) -> tuple[int, ...]:
        return kernels.out_spatial(in_spatial, self.kernel, self.stride, self.padding)


@dataclass
class ArgIndexMap:
    """Winners recorded by a forward pass, consumed by the backward pass.

    kernel_arg[n, co, ci, p] is the flat kernel index that won the window
    reduction (-1 when every offset of the window was padded); values holds
    the corresponding reduced value. channel_arg is present only for
    max/min channel aggregation and records the winning input channel.
    """

    kernel_arg: np.ndarray
    values: np.ndarray
    spec: ConvSpec
    wmode: WindowMode
    in_spatial: tuple[int, ...]
    out_spatial: tuple[int, ...]
    cmode: ChannelMode | None = None
    channel_arg: np.ndarray | None = None

    @property
    def fully_padded(self) -> np.ndarray:
        return self.kernel_arg < 0


def _check_conv_shapes(x: Tensor, w: Tensor, spec: ConvSpec) -> tuple:
    if len(x.shape) != spec.dim + 2:
        raise ShapeError(
            f"input rank {len(x.shape)} incompatible with {spec.dim}d spec "
            f"(expected batch, channel and {spec.dim} spatial axes)"
        )
    n, ci = x.shape[0], x.shape[1]
    if ci != spec.in_channels:
        raise ShapeError(f"input has {ci} channels, spec expects {spec.in_channels}")
    expected_w = (spec.out_channels, spec.in_channels) + spec.kernel
    if w.shape != expected_w:
        raise ShapeError(f"weights shape {w.shape} != expected {expected_w}")
    in_spatial = x.shape[2:]
    outs = spec.out_spatial(in_spatial)
    return n, in_spatial, outs


def window_reduce(x: Tensor, w: Tensor, spec: ConvSpec, wmode: WindowMode):
    """Per-channel tropical window reduction.

    Returns a [N, C_out, C_in, *out_spatial] tensor of reduced values plus
    the ArgIndexMap of winning kernel offsets.
    """
    n, in_spatial, outs = _check_conv_shapes(x, w, spec)
    s_in = int(np.prod(in_spatial))
    table = kernels.gather_table(in_spatial, spec.kernel, spec.stride, spec.padding)
    x2 = x.data.reshape(n, spec.in_channels, s_in)
    w2 = w.data.reshape(spec.out_channels, spec.in_channels, spec.kernel_size)
    mode = kernels.MODE_MIN if wmode is WindowMode.MIN else kernels.MODE_MAX
    vals, args = kernels.active.window_reduce(x2, w2, table, mode)
    amap = ArgIndexMap(kernel_arg=args, values=vals, spec=spec, wmode=wmode,
                       in_spatial=in_spatial, out_spatial=outs)
    per_channel = Tensor(vals.reshape((n, spec.out_channels, spec.in_channels) + outs))
    return per_channel, amap


def _aggregate(vals: np.ndarray, cmode: ChannelMode, amap: ArgIndexMap) -> np.ndarray:
    if cmode is ChannelMode.SUM:
        return vals.sum(axis=2)
    ch = vals.argmax(axis=2) if cmode is ChannelMode.MAX else vals.argmin(axis=2)
    amap.channel_arg = ch.astype(np.int32)
    return np.take_along_axis(vals, ch[:, :, None, :], axis=2)[:, :, 0, :]


def tropical_conv_forward(x: Tensor, w: Tensor, spec: ConvSpec,
                          wmode: WindowMode, cmode: ChannelMode):
    """Full tropical convolution: window reduction + channel aggregation."""
    per_channel, amap = window_reduce(x, w, spec, wmode)
    amap.cmode = cmode
    n = x.shape[0]
    out = _aggregate(amap.values, cmode, amap)
    return Tensor(out.reshape((n, spec.out_channels) + amap.out_spatial)), amap


def routed_contributions(grad_flat: np.ndarray, amap: ArgIndexMap,
                         cmode: ChannelMode) -> np.ndarray:
    """Expand [N, C_out, P] upstream grads to per-input-channel contributions.

    Sum aggregation passes the gradient to every input channel; max/min
    pass it only to the recorded winning channel.
    """
    n, co, ci, p = amap.kernel_arg.shape
    if cmode is ChannelMode.SUM:
        return np.ascontiguousarray(
            np.broadcast_to(grad_flat[:, :, None, :], (n, co, ci, p)), dtype=np.float32)
    contrib = np.zeros((n, co, ci, p), dtype=np.float32)
    np.put_along_axis(contrib, amap.channel_arg[:, :, None, :].astype(np.int64),
                      grad_flat[:, :, None, :], axis=2)
    return contrib


def _check_backward_contract(grad_output: Tensor, amap: ArgIndexMap,
                             spec: ConvSpec, cmode: ChannelMode | None):
    if amap.spec != spec:
        raise ContractError("ArgIndexMap was produced under a different ConvSpec")
    if cmode is not None and amap.cmode is not None and amap.cmode is not cmode:
        raise ContractError(f"ArgIndexMap records {amap.cmode}, backward got {cmode}")
    n = amap.kernel_arg.shape[0]
    expected = (n, spec.out_channels) + amap.out_spatial
    if grad_output.shape != expected:
        raise ContractError(
            f"grad_output shape {grad_output.shape} != forward output {expected}")
    if cmode in (ChannelMode.MAX, ChannelMode.MIN) and amap.channel_arg is None:
        raise ContractError("ArgIndexMap lacks channel winners for max/min aggregation")


def scatter_window_grads(contrib: np.ndarray, amap: ArgIndexMap):
    """Scatter per-channel contributions back to input and weight grads."""
    table = kernels.gather_table(amap.in_spatial, amap.spec.kernel,
                                 amap.spec.stride, amap.spec.padding)
    s_in = int(np.prod(amap.in_spatial))
    gx, gw = kernels.active.scatter_backward(contrib, amap.kernel_arg, table, s_in)
    n = contrib.shape[0]
    spec = amap.spec
    gx = gx.reshape((n, spec.in_channels) + tuple(amap.in_spatial))
    gw = gw.reshape((spec.out_channels, spec.in_channels) + spec.kernel)
    return Tensor(gx), Tensor(gw)


def tropical_conv_backward(grad_output: Tensor, amap: ArgIndexMap,
                           spec: ConvSpec, cmode: ChannelMode):
    """Sub-gradient backward for a tropical convolution."""
    _check_backward_contract(grad_output, amap, spec, cmode)
    n, co = grad_output.shape[0], grad_output.shape[1]
    g = grad_output.data.reshape(n, co, -1)
    contrib = routed_contributions(g, amap, cmode)
    return scatter_window_grads(contrib, amap)


def re_evaluate(x: Tensor, w: Tensor, amap: ArgIndexMap) -> np.ndarray:
    """Recompute window values from the recorded winners.

    Substituting each winner back into input + weight must reproduce the
    forward value exactly; used to validate ArgIndexMap integrity.
    """
    spec = amap.spec
    n = amap.kernel_arg.shape[0]
    s_in = int(np.prod(amap.in_spatial))
    table = kernels.gather_table(amap.in_spatial, spec.kernel, spec.stride, spec.padding)
    x2 = x.data.reshape(n, spec.in_channels, s_in)
    w2 = w.data.reshape(spec.out_channels, spec.in_channels, spec.kernel_size)

    args = amap.kernel_arg
    valid = args >= 0
    safe = np.where(valid, args, 0).astype(np.int64)
    n_idx, co_idx, ci_idx, p_idx = np.indices(args.shape, sparse=True)
    src = table[p_idx, safe]
    vals = x2[n_idx, ci_idx, src] + w2[co_idx, ci_idx, safe]
    fill = np.float32(np.inf) if amap.wmode is WindowMode.MIN else np.float32(-np.inf)
    return np.where(valid, vals, fill).astype(np.float32)
