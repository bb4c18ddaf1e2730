"""Builders for the LeNet-style model family.

Every variant shares one skeleton: two convolution-family layers, each
followed by 2x average pooling (the classic pair has an activation between
conv and pool, tropical variants have none), then flatten and a
120 -> 84 -> classes classifier with activations between the linear
layers. Variants differ only in what the two conv slots contain.

Conv geometry by dimension (stride 1 everywhere):
    1d: kernel 80 pad 2, then kernel 3 pad 0
    2d: kernel 5x5 pad 2, then kernel 5x5 pad 0
    3d: kernel 5^3 pad 2, then kernel 5^3 pad 0
Channel plan is in_channels -> 6 -> 16. The flatten width is always
derived from shape propagation, never hand-entered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError, ShapeError
from .mixed import MixMode
from .nn import (AvgPool, CompoundConv, Flatten, Layer, Linear, Model, ParallelConv,
                 ReLU, Sigmoid, StandardConv, TropicalConv, child_seed)
from .tropical import ChannelMode, ConvSpec, WindowMode


class VariantId(Enum):
    LENET = "LeNet"
    LENET_RELU = "LeNetReLU"
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    C_A = "C_a"
    C_AB = "C_ab"
    CM_A = "CM_a"
    CM_AB = "CM_ab"
    P_A = "P_a"
    P_AB = "P_ab"
    PM_A = "PM_a"
    PM_AB = "PM_ab"
    CC = "CC"
    CCM = "CCM"
    CP = "CP"
    CPM = "CPM"


_DESCRIPTIONS = {
    VariantId.LENET: "standard convolutions with sigmoid activations",
    VariantId.LENET_RELU: "standard convolutions with ReLU activations",
    VariantId.F1: "min-plus-sum then max-plus-sum tropical convolutions",
    VariantId.F2: "min-plus-max then max-plus-min tropical convolutions",
    VariantId.F3: "min-plus-sum tropical then standard convolution",
    VariantId.C_A: "compound convolutions, one mixing parameter",
    VariantId.C_AB: "compound convolutions, two mixing parameters",
    VariantId.CM_A: "compound (one parameter) then standard convolution",
    VariantId.CM_AB: "compound (two parameters) then standard convolution",
    VariantId.P_A: "parallel convolutions, one mixing parameter",
    VariantId.P_AB: "parallel convolutions, two mixing parameters",
    VariantId.PM_A: "parallel (one parameter) then standard convolution",
    VariantId.PM_AB: "parallel (two parameters) then standard convolution",
    VariantId.CC: "compound convolutions with fixed unit mixing",
    VariantId.CCM: "fixed-mix compound then standard convolution",
    VariantId.CP: "parallel convolutions with fixed unit mixing",
    VariantId.CPM: "fixed-mix parallel then standard convolution",
}

_CONV_PLAN = {
    1: dict(k1=(80,), p1=(2,), k2=(3,), p2=(0,)),
    2: dict(k1=(5, 5), p1=(2, 2), k2=(5, 5), p2=(0, 0)),
    3: dict(k1=(5, 5, 5), p1=(2, 2, 2), k2=(5, 5, 5), p2=(0, 0, 0)),
}

CONV1_CHANNELS = 6
CONV2_CHANNELS = 16
HIDDEN = (120, 84)


@dataclass(frozen=True)
class ModelConfig:
    variant: VariantId
    dim: int
    input_shape: tuple  # (channels, spatial...)
    num_classes: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.input_shape) != self.dim + 1:
            raise ShapeError(
                f"input_shape {self.input_shape} must be (channels, {self.dim} spatial)")
        if self.num_classes < 2:
            raise DomainError("num_classes must be >= 2")

    def to_json(self) -> str:
        return json.dumps({
            "variant": self.variant.value,
            "dim": self.dim,
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "seed": self.seed,
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ModelConfig":
        doc = json.loads(text)
        return ModelConfig(
            variant=VariantId(doc["variant"]),
            dim=int(doc["dim"]),
            input_shape=tuple(doc["input_shape"]),
            num_classes=int(doc["num_classes"]),
            seed=int(doc.get("seed", 0)),
        )


# conv slot tokens: what goes into each of the two convolution positions
_STD = ("std",)
_TROP = lambda w, c: ("trop", w, c)
_COMP = lambda m: ("compound", m)
_PAR = lambda m: ("parallel", m)

_ROSTER = {
    VariantId.LENET: (_STD, _STD),
    VariantId.LENET_RELU: (_STD, _STD),
    VariantId.F1: (_TROP(WindowMode.MIN, ChannelMode.SUM), _TROP(WindowMode.MAX, ChannelMode.SUM)),
    VariantId.F2: (_TROP(WindowMode.MIN, ChannelMode.MAX), _TROP(WindowMode.MAX, ChannelMode.MIN)),
    VariantId.F3: (_TROP(WindowMode.MIN, ChannelMode.SUM), _STD),
    VariantId.C_A: (_COMP(MixMode.ONE_PARAM), _COMP(MixMode.ONE_PARAM)),
    VariantId.C_AB: (_COMP(MixMode.TWO_PARAM), _COMP(MixMode.TWO_PARAM)),
    VariantId.CM_A: (_COMP(MixMode.ONE_PARAM), _STD),
    VariantId.CM_AB: (_COMP(MixMode.TWO_PARAM), _STD),
    VariantId.P_A: (_PAR(MixMode.ONE_PARAM), _PAR(MixMode.ONE_PARAM)),
    VariantId.P_AB: (_PAR(MixMode.TWO_PARAM), _PAR(MixMode.TWO_PARAM)),
    VariantId.PM_A: (_PAR(MixMode.ONE_PARAM), _STD),
    VariantId.PM_AB: (_PAR(MixMode.TWO_PARAM), _STD),
    VariantId.CC: (_COMP(MixMode.FIXED_SUM), _COMP(MixMode.FIXED_SUM)),
    VariantId.CCM: (_COMP(MixMode.FIXED_SUM), _STD),
    VariantId.CP: (_PAR(MixMode.FIXED_SUM), _PAR(MixMode.FIXED_SUM)),
    VariantId.CPM: (_PAR(MixMode.FIXED_SUM), _STD),
}


def _make_conv(token, spec: ConvSpec, seed: int) -> Layer:
    if token[0] == "std":
        return StandardConv(spec, seed=seed)
    if token[0] == "trop":
        return TropicalConv(spec, token[1], token[2], seed=seed)
    if token[0] == "compound":
        return CompoundConv(spec, token[1], seed=seed)
    return ParallelConv(spec, token[1], seed=seed)


def _conv_activation(variant: VariantId):
    """Activation class after each conv; tropical variants use none."""
    if variant is VariantId.LENET:
        return Sigmoid
    if variant is VariantId.LENET_RELU:
        return ReLU
    return None


def build(config: ModelConfig) -> Model:
    """Assemble the variant's layer stack; raises ShapeError if the input
    is too small for the kernel chain."""
    plan = _CONV_PLAN[config.dim]
    ones = (1,) * config.dim
    in_channels = config.input_shape[0]
    spec1 = ConvSpec(config.dim, in_channels, CONV1_CHANNELS,
                     plan["k1"], ones, plan["p1"])

    tokens = _ROSTER[config.variant]
    conv_act = _conv_activation(config.variant)
    linear_act = Sigmoid if config.variant is VariantId.LENET else ReLU

    layers: list[Layer] = []
    shape = config.input_shape
    layers.append(_make_conv(tokens[0], spec1, child_seed(config.seed, 0)))
    shape = layers[-1].out_shape(shape)
    if conv_act is not None:
        layers.append(conv_act())
    layers.append(AvgPool(config.dim))
    shape = layers[-1].out_shape(shape)

    spec2 = ConvSpec(config.dim, CONV1_CHANNELS, CONV2_CHANNELS,
                     plan["k2"], ones, plan["p2"])
    layers.append(_make_conv(tokens[1], spec2, child_seed(config.seed, 1)))
    shape = layers[-1].out_shape(shape)
    if conv_act is not None:
        layers.append(conv_act())
    layers.append(AvgPool(config.dim))
    shape = layers[-1].out_shape(shape)

    layers.append(Flatten())
    shape = layers[-1].out_shape(shape)

    widths = (shape[0],) + HIDDEN + (config.num_classes,)
    for i in range(3):
        layers.append(Linear(widths[i], widths[i + 1], seed=child_seed(config.seed, 2 + i)))
        if i < 2:
            layers.append(linear_act())

    return Model(layers, name=config.variant.value, dim=config.dim,
                 num_classes=config.num_classes, input_shape=config.input_shape)


def list_variants() -> list[tuple[VariantId, str]]:
    return [(v, _DESCRIPTIONS[v]) for v in VariantId]


def count_parameters(model: Model) -> int:
    return sum(t.size for _, _, t in model.parameters())
