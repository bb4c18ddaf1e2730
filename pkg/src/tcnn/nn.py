"""Layers, the sequential model container, and the classification loss.

Layers are stateless between calls: forward returns (output, ctx) and
backward consumes that ctx, so one tape per in-flight forward keeps
concurrent evaluation safe. Parameter gradients come back as a dict keyed
like params().
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ShapeError
from .mixed import (MixMode, MixParams, compound_backward, compound_forward,
                    parallel_backward, parallel_forward)
from .tensor import Tensor, uniform_fill
from .tropical import (ChannelMode, ConvSpec, WindowMode, tropical_conv_backward,
                       tropical_conv_forward)


def child_seed(seed: int, index: int) -> int:
    """Derive a stable 64-bit stream seed for the index-th tensor of a layer."""
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index]).generate_state(1)[0])


class Layer:
    kind = "layer"

    def params(self) -> dict[str, Tensor]:
        return {}

    def forward(self, x: Tensor):
        raise NotImplementedError

    def backward(self, grad: Tensor, ctx):
        raise NotImplementedError

    def out_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def __repr__(self):
        return f"{type(self).__name__}()"


def _conv_init(spec: ConvSpec, seed: int, name_index: int) -> Tensor:
    fan_in = spec.in_channels * spec.kernel_size
    bound = 1.0 / float(np.sqrt(fan_in))
    shape = (spec.out_channels, spec.in_channels) + spec.kernel
    return uniform_fill(shape, -bound, bound, child_seed(seed, name_index))


def _bias_init(spec: ConvSpec, seed: int, name_index: int) -> Tensor:
    fan_in = spec.in_channels * spec.kernel_size
    bound = 1.0 / float(np.sqrt(fan_in))
    return uniform_fill((spec.out_channels,), -bound, bound, child_seed(seed, name_index))


def _add_bias(out: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return out + bias.reshape((1, -1) + (1,) * (out.ndim - 2))


def _bias_grad(grad: np.ndarray) -> Tensor:
    return Tensor(grad.reshape(grad.shape[0], grad.shape[1], -1).sum(axis=(0, 2)))


def _check_in_channels(spec: ConvSpec, in_shape: tuple):
    if len(in_shape) != spec.dim + 1 or in_shape[0] != spec.in_channels:
        raise ShapeError(f"layer expects ({spec.in_channels}, spatial...), got {in_shape}")


class StandardConv(Layer):
    """Dense cross-correlation with zero padding and a channel bias."""

    kind = "standard_conv"

    def __init__(self, spec: ConvSpec, seed: int = 0):
        self.spec = spec
        self.weights = _conv_init(spec, seed, 0)
        self.bias = _bias_init(spec, seed, 1)

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def out_shape(self, in_shape):
        _check_in_channels(self.spec, in_shape)
        return (self.spec.out_channels,) + self.spec.out_spatial(in_shape[1:])

    def forward(self, x: Tensor):
        spec = self.spec
        n = x.shape[0]
        in_spatial = x.shape[2:]
        outs = spec.out_spatial(in_spatial)
        table = kernels.gather_table(in_spatial, spec.kernel, spec.stride, spec.padding)
        x2 = x.data.reshape(n, spec.in_channels, -1)
        w2 = self.weights.data.reshape(spec.out_channels, spec.in_channels, -1)
        cols = kernels.im2col(x2, table)
        y = np.tensordot(cols, w2, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
        y = y + self.bias.data[None, :, None]
        out = Tensor(y.reshape((n, spec.out_channels) + outs))
        return out, (cols, table, in_spatial)

    def backward(self, grad: Tensor, ctx):
        cols, table, in_spatial = ctx
        spec = self.spec
        n = grad.shape[0]
        g2 = grad.data.reshape(n, spec.out_channels, -1)
        w2 = self.weights.data.reshape(spec.out_channels, spec.in_channels, -1)
        gw = np.tensordot(g2, cols, axes=([0, 2], [0, 2]))
        gcols = np.einsum("nop,ock->ncpk", g2, w2)
        gx = kernels.col2im(gcols, table, int(np.prod(in_spatial)))
        grads = {
            "weights": Tensor(gw.reshape(self.weights.shape)),
            "bias": _bias_grad(grad.data),
        }
        return Tensor(gx.reshape((n, spec.in_channels) + tuple(in_spatial))), grads


class TropicalConv(Layer):
    """Min-plus or max-plus windows with sum/max/min channel aggregation."""

    kind = "tropical_conv"

    def __init__(self, spec: ConvSpec, wmode: WindowMode, cmode: ChannelMode, seed: int = 0):
        self.spec = spec
        self.wmode = wmode
        self.cmode = cmode
        self.weights = _conv_init(spec, seed, 0)
        self.bias = _bias_init(spec, seed, 1)

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def out_shape(self, in_shape):
        _check_in_channels(self.spec, in_shape)
        return (self.spec.out_channels,) + self.spec.out_spatial(in_shape[1:])

    def forward(self, x: Tensor):
        out, amap = tropical_conv_forward(x, self.weights, self.spec, self.wmode, self.cmode)
        return Tensor(_add_bias(out.data, self.bias.data)), amap

    def backward(self, grad: Tensor, ctx):
        gx, gw = tropical_conv_backward(grad, ctx, self.spec, self.cmode)
        return gx, {"weights": gw, "bias": _bias_grad(grad.data)}


def _mix_init(spec: ConvSpec, mode: MixMode) -> MixParams | None:
    """Mixing coefficients start at 0.5 so both branches contribute equally."""
    if mode is MixMode.FIXED_SUM:
        return None
    shape = (spec.in_channels, spec.out_channels)
    alpha = Tensor(np.full(shape, 0.5, dtype=np.float32))
    if mode is MixMode.ONE_PARAM:
        return MixParams(alpha=alpha)
    return MixParams(alpha=alpha, beta=Tensor(np.full(shape, 0.5, dtype=np.float32)))


class CompoundConv(Layer):
    """One kernel, mixed min-plus and max-plus responses."""

    kind = "compound_conv"

    def __init__(self, spec: ConvSpec, mode: MixMode, seed: int = 0):
        self.spec = spec
        self.mode = mode
        self.weights = _conv_init(spec, seed, 0)
        self.bias = _bias_init(spec, seed, 1)
        self.mix = _mix_init(spec, mode)

    def params(self):
        out = {"weights": self.weights, "bias": self.bias}
        if self.mix is not None:
            out["alpha"] = self.mix.alpha
            if self.mix.beta is not None:
                out["beta"] = self.mix.beta
        return out

    def out_shape(self, in_shape):
        _check_in_channels(self.spec, in_shape)
        return (self.spec.out_channels,) + self.spec.out_spatial(in_shape[1:])

    def forward(self, x: Tensor):
        out, min_args, max_args = compound_forward(x, self.weights, self.mix, self.mode, self.spec)
        return Tensor(_add_bias(out.data, self.bias.data)), (min_args, max_args)

    def backward(self, grad: Tensor, ctx):
        min_args, max_args = ctx
        gx, gw, ga, gb = compound_backward(grad, min_args, max_args, min_args.values,
                                           max_args.values, self.mix, self.mode, self.spec)
        grads = {"weights": gw, "bias": _bias_grad(grad.data)}
        if ga is not None:
            grads["alpha"] = ga
        if gb is not None:
            grads["beta"] = gb
        return gx, grads


class ParallelConv(Layer):
    """Two kernels: one feeds the min-plus branch, the other the max-plus."""

    kind = "parallel_conv"

    def __init__(self, spec: ConvSpec, mode: MixMode, seed: int = 0):
        self.spec = spec
        self.mode = mode
        self.w1 = _conv_init(spec, seed, 0)
        self.w2 = _conv_init(spec, seed, 2)
        self.bias = _bias_init(spec, seed, 1)
        self.mix = _mix_init(spec, mode)

    def params(self):
        out = {"w1": self.w1, "w2": self.w2, "bias": self.bias}
        if self.mix is not None:
            out["alpha"] = self.mix.alpha
            if self.mix.beta is not None:
                out["beta"] = self.mix.beta
        return out

    def out_shape(self, in_shape):
        _check_in_channels(self.spec, in_shape)
        return (self.spec.out_channels,) + self.spec.out_spatial(in_shape[1:])

    def forward(self, x: Tensor):
        out, min_args, max_args = parallel_forward(x, self.w1, self.w2, self.mix,
                                                   self.mode, self.spec)
        return Tensor(_add_bias(out.data, self.bias.data)), (min_args, max_args)

    def backward(self, grad: Tensor, ctx):
        min_args, max_args = ctx
        gx, gw1, gw2, ga, gb = parallel_backward(grad, min_args, max_args, min_args.values,
                                                 max_args.values, self.mix, self.mode, self.spec)
        grads = {"w1": gw1, "w2": gw2, "bias": _bias_grad(grad.data)}
        if ga is not None:
            grads["alpha"] = ga
        if gb is not None:
            grads["beta"] = gb
        return gx, grads


class AvgPool(Layer):
    kind = "avg_pool"

    def __init__(self, dim: int, window: int = 2, stride: int = 2):
        self.dim = dim
        self.window = (window,) * dim
        self.stride = (stride,) * dim
        self.pad = (0,) * dim

    def out_shape(self, in_shape):
        if len(in_shape) != self.dim + 1:
            raise ShapeError(f"pool expects (channels, {self.dim} spatial), got {in_shape}")
        return (in_shape[0],) + kernels.out_spatial(in_shape[1:], self.window,
                                                    self.stride, self.pad)

    def forward(self, x: Tensor):
        n, c = x.shape[0], x.shape[1]
        in_spatial = x.shape[2:]
        outs = kernels.out_spatial(in_spatial, self.window, self.stride, self.pad)
        table = kernels.gather_table(in_spatial, self.window, self.stride, self.pad)
        cols = x.data.reshape(n, c, -1)[:, :, table]
        out = cols.mean(axis=-1)
        return Tensor(out.reshape((n, c) + outs)), (table, in_spatial)

    def backward(self, grad: Tensor, ctx):
        table, in_spatial = ctx
        n, c = grad.shape[0], grad.shape[1]
        k = table.shape[1]
        g2 = grad.data.reshape(n, c, -1) / np.float32(k)
        gcols = np.broadcast_to(g2[..., None], g2.shape + (k,))
        gx = kernels.col2im(np.ascontiguousarray(gcols), table, int(np.prod(in_spatial)))
        return Tensor(gx.reshape((n, c) + tuple(in_spatial))), {}


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x: Tensor):
        v = x.data
        out = np.empty_like(v)
        pos = v >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
        ev = np.exp(v[~pos])
        out[~pos] = ev / (1.0 + ev)
        return Tensor(out), out

    def backward(self, grad: Tensor, ctx):
        return Tensor(grad.data * ctx * (1.0 - ctx)), {}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x: Tensor):
        mask = x.data > 0
        return Tensor(x.data * mask), mask

    def backward(self, grad: Tensor, ctx):
        return Tensor(grad.data * ctx), {}


class Flatten(Layer):
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x: Tensor):
        n = x.shape[0]
        return Tensor(x.data.reshape(n, -1)), x.shape

    def backward(self, grad: Tensor, ctx):
        return Tensor(grad.data.reshape(ctx)), {}


class Linear(Layer):
    kind = "linear"

    def __init__(self, in_features: int, out_features: int, seed: int = 0):
        self.in_features = in_features
        self.out_features = out_features
        bound = 1.0 / float(np.sqrt(in_features))
        self.weights = uniform_fill((in_features, out_features), -bound, bound,
                                    child_seed(seed, 0))
        self.bias = uniform_fill((out_features,), -bound, bound, child_seed(seed, 1))

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise ShapeError(f"linear expects ({self.in_features},), got {in_shape}")
        return (self.out_features,)

    def forward(self, x: Tensor):
        y = x.data @ self.weights.data + self.bias.data[None, :]
        return Tensor(y), x.data

    def backward(self, grad: Tensor, ctx):
        gx = grad.data @ self.weights.data.T
        gw = ctx.T @ grad.data
        return Tensor(gx), {"weights": Tensor(gw), "bias": Tensor(grad.data.sum(axis=0))}


class Model:
    """Ordered layer stack with shape checking at build time."""

    def __init__(self, layers: list[Layer], name: str, dim: int, num_classes: int,
                 input_shape: tuple):
        self.layers = list(layers)
        self.name = name
        self.dim = dim
        self.num_classes = num_classes
        self.input_shape = tuple(input_shape)
        shape = self.input_shape
        self.layer_shapes = [shape]
        for layer in self.layers:
            shape = layer.out_shape(shape)
            self.layer_shapes.append(shape)
        if shape != (num_classes,):
            raise ShapeError(
                f"model '{name}' produces {shape}, expected ({num_classes},) logits")

    def forward(self, x: Tensor):
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"input shape {x.shape[1:]} != declared {self.input_shape}")
        tape = []
        for layer in self.layers:
            x, ctx = layer.forward(x)
            tape.append(ctx)
        return x, tape

    def backward(self, tape, grad: Tensor):
        """Per-layer parameter grads (outermost first) plus the input grad."""
        grads: list[dict[str, Tensor]] = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads = self.layers[i].backward(grad, tape[i])
            grads[i] = layer_grads
        return grads, grad

    def parameters(self):
        """Flat list of (layer_index, name, tensor) in deterministic order."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, tensor in layer.params().items():
                out.append((i, name, tensor))
        return out

    def __repr__(self):
        return f"Model({self.name}, {len(self.layers)} layers)"


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray):
    """Mean negative log softmax probability of the true class.

    Returns (loss, grad_logits); the gradient of each sample's logits sums
    to zero. Stabilized by max subtraction; internals run in float64.
    """
    z = logits.data.astype(np.float64)
    n, c = z.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} != ({n},)")
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    loss = float(-np.log(p[np.arange(n), labels]).mean())
    grad = p
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, Tensor(grad.astype(np.float32))
