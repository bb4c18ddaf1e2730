"""Closed-form operation counting and the unified cost.

Counts are symbolic, never instrumented: each layer kind has a closed form
in the kernel size K, input/output channels C and C', and output positions
P (all products over axes). Conventions, per output position unless noted:

    standard conv   mults K*C*C'*P, adds (C-1)(K-1)*C'*P, no comparisons.
                    The addition form undercounts the conventional
                    (C*K - 1)*C'*P; it is the default this analyzer is
                    calibrated against, with exact_standard=True switching
                    to the conventional count. Bias adds are not counted for
                    any convolution kind.
    tropical sum    adds (C - 1 + C*K)*C'*P, comparisons (K-1)*C*C'*P.
    tropical max/min adds C*K*C'*P, comparisons (K*C - 1)*C'*P.
    compound        mults 2*C*C'*P, adds (K*C + 2C - 1)*C'*P, comparisons
                    2*(K-1)*C*C'*P. The comparison factor 2 reflects the
                    naive two-scan min+max convention even though the
                    runtime fuses both extremes into one scan.
    parallel        as compound with adds (2*K*C + 2C - 1)*C'*P (a second
                    window-sum pass).
    fixed-sum forms drop the two mixing multiplications (coefficients are
                    hard-wired to 1), keeping adds and comparisons.
    avg pool        one divide (counted as a mult) and K-1 adds per output.
    linear          F*G mults and F*G adds (F-1 sums plus the bias add).
    relu            one comparison per element.
    sigmoid         one add and one divide per element; the exponential is
                    outside the mult/add/comparison model and not counted.

The unified cost folds the triple into one number: theta * mults + adds +
comparisons, theta defaulting to 10.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .mixed import MixMode
from .nn import (AvgPool, CompoundConv, Flatten, Linear, Model, ParallelConv, ReLU,
                 Sigmoid, StandardConv, TropicalConv)
from .tropical import ChannelMode, ConvSpec


@dataclass(frozen=True)
class OpCount:
    mults: int
    adds: int
    comparisons: int

    def __add__(self, other: "OpCount") -> "OpCount":
        return OpCount(self.mults + other.mults, self.adds + other.adds,
                       self.comparisons + other.comparisons)

    def scale(self, factor: int) -> "OpCount":
        return OpCount(self.mults * factor, self.adds * factor, self.comparisons * factor)


ZERO_COUNT = OpCount(0, 0, 0)
DEFAULT_THETA = Fraction(10)


class LayerKind(Enum):
    STANDARD_CONV = "standard_conv"
    TROPICAL_SUM = "tropical_sum"
    TROPICAL_EXTREME = "tropical_extreme"
    COMPOUND = "compound"
    COMPOUND_FIXED = "compound_fixed"
    PARALLEL = "parallel"
    PARALLEL_FIXED = "parallel_fixed"
    AVG_POOL = "avg_pool"
    LINEAR = "linear"
    RELU = "relu"
    SIGMOID = "sigmoid"
    FLATTEN = "flatten"


def count_layer(kind: LayerKind, spec: ConvSpec, out_spatial, batch: int = 1,
                exact_standard: bool = False) -> OpCount:
    """Operation triple for one layer at the given output geometry.

    For AVG_POOL pass the pool window as a ConvSpec with equal in/out
    channels; for LINEAR use in_channels=F, out_channels=G and a unit
    out_spatial; for element-wise kinds only out_channels * out_spatial
    matters.
    """
    if not isinstance(kind, LayerKind):
        raise DomainError(f"unknown layer kind: {kind!r}")
    k = int(np.prod(spec.kernel))
    c = spec.in_channels
    co = spec.out_channels
    p = int(np.prod(out_spatial))
    b = int(batch)
    cop = co * p * b

    if kind is LayerKind.STANDARD_CONV:
        adds = (c * k - 1) * cop if exact_standard else (c - 1) * (k - 1) * cop
        return OpCount(k * c * cop, adds, 0)
    if kind is LayerKind.TROPICAL_SUM:
        return OpCount(0, (c - 1 + c * k) * cop, (k - 1) * c * cop)
    if kind is LayerKind.TROPICAL_EXTREME:
        return OpCount(0, c * k * cop, (k * c - 1) * cop)
    if kind is LayerKind.COMPOUND:
        return OpCount(2 * c * cop, (k * c + 2 * c - 1) * cop, 2 * (k - 1) * c * cop)
    if kind is LayerKind.COMPOUND_FIXED:
        return OpCount(0, (k * c + 2 * c - 1) * cop, 2 * (k - 1) * c * cop)
    if kind is LayerKind.PARALLEL:
        return OpCount(2 * c * cop, (2 * k * c + 2 * c - 1) * cop, 2 * (k - 1) * c * cop)
    if kind is LayerKind.PARALLEL_FIXED:
        return OpCount(0, (2 * k * c + 2 * c - 1) * cop, 2 * (k - 1) * c * cop)
    if kind is LayerKind.AVG_POOL:
        return OpCount(cop, (k - 1) * cop, 0)
    if kind is LayerKind.LINEAR:
        return OpCount(c * cop, c * cop, 0)
    if kind is LayerKind.RELU:
        return OpCount(0, 0, cop)
    if kind is LayerKind.SIGMOID:
        return OpCount(cop, cop, 0)
    if kind is LayerKind.FLATTEN:
        return ZERO_COUNT
    raise DomainError(f"unknown layer kind: {kind!r}")  # pragma: no cover


def unified(count: OpCount, theta=DEFAULT_THETA):
    """theta * mults + adds + comparisons."""
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    return theta * count.mults + count.adds + count.comparisons


def _layer_kind(layer) -> LayerKind:
    if isinstance(layer, StandardConv):
        return LayerKind.STANDARD_CONV
    if isinstance(layer, TropicalConv):
        return (LayerKind.TROPICAL_SUM if layer.cmode is ChannelMode.SUM
                else LayerKind.TROPICAL_EXTREME)
    if isinstance(layer, CompoundConv):
        return (LayerKind.COMPOUND_FIXED if layer.mode is MixMode.FIXED_SUM
                else LayerKind.COMPOUND)
    if isinstance(layer, ParallelConv):
        return (LayerKind.PARALLEL_FIXED if layer.mode is MixMode.FIXED_SUM
                else LayerKind.PARALLEL)
    if isinstance(layer, AvgPool):
        return LayerKind.AVG_POOL
    if isinstance(layer, Linear):
        return LayerKind.LINEAR
    if isinstance(layer, ReLU):
        return LayerKind.RELU
    if isinstance(layer, Sigmoid):
        return LayerKind.SIGMOID
    if isinstance(layer, Flatten):
        return LayerKind.FLATTEN
    raise DomainError(f"no counting rule for layer {type(layer).__name__}")


@dataclass
class LayerCost:
    index: int
    name: str
    kind: LayerKind
    count: OpCount
    omega_u: Fraction


@dataclass
class ModelCost:
    rows: list
    total: OpCount
    omega_u: Fraction


def count_model(model: Model, theta=DEFAULT_THETA, batch: int = 1,
                exact_standard: bool = False) -> ModelCost:
    """Shape-propagated per-layer costs and their totals."""
    rows = []
    total = ZERO_COUNT
    for i, layer in enumerate(model.layers):
        in_shape = model.layer_shapes[i]
        out_shape = model.layer_shapes[i + 1]
        kind = _layer_kind(layer)
        if kind in (LayerKind.AVG_POOL,):
            spec = ConvSpec(layer.dim, in_shape[0], in_shape[0], layer.window,
                            layer.stride, layer.pad)
            count = count_layer(kind, spec, out_shape[1:], batch)
        elif kind is LayerKind.LINEAR:
            spec = ConvSpec(1, layer.in_features, layer.out_features, (1,), (1,), (0,))
            count = count_layer(kind, spec, (1,), batch)
        elif kind in (LayerKind.RELU, LayerKind.SIGMOID, LayerKind.FLATTEN):
            spec = ConvSpec(1, 1, int(np.prod(out_shape)), (1,), (1,), (0,))
            count = count_layer(kind, spec, (1,), batch)
        else:
            count = count_layer(kind, layer.spec, out_shape[1:], batch, exact_standard)
        rows.append(LayerCost(i, type(layer).__name__, kind, count, unified(count, theta)))
        total = total + count
    return ModelCost(rows=rows, total=total, omega_u=unified(total, theta))


def ratios_vs_standard(spec: ConvSpec) -> dict:
    """Per-operation cost ratios of each tropical family vs standard conv.

    Ratios with a zero denominator (C_in = 1, or K = 1 for the mixed
    addition ratios) are reported as None with a degenerate flag.
    """
    k = spec.kernel_size
    c = spec.in_channels
    out = {
        "degenerate": c == 1 or k == 1,
        "tropical_sum_addition": None,
        "tropical_extreme_addition": None,
        "compound_multiplication": Fraction(2, k),
        "compound_addition": None,
        "parallel_multiplication": Fraction(2, k),
        "parallel_addition": None,
    }
    if c > 1:
        out["tropical_sum_addition"] = 1 + Fraction(c * k, c - 1)
        out["tropical_extreme_addition"] = Fraction(c * k, c - 1)
        if k > 1:
            out["compound_addition"] = Fraction(k * c + 2 * c - 1, (c - 1) * (k - 1))
            out["parallel_addition"] = Fraction(2 * k * c + 2 * c - 1, (c - 1) * (k - 1))
    return out
