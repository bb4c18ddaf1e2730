"""Central finite-difference verification of every backward pass.

Each suite builds a small randomly initialized layer (or model), defines a
scalar loss (a fixed random projection of the output, or cross-entropy for
the loss/model suites), and compares analytic gradients against central
differences coordinate by coordinate. A coordinate passes when the values
agree within a relative tolerance or are both negligibly small; a suite
passes when at least ``min_rate`` of its coordinates pass. Tropical layers
are piecewise linear, so isolated failures near min/max winner boundaries
are expected and absorbed by the rate threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixed import MixMode
from .nn import (AvgPool, CompoundConv, Flatten, Linear, Model, ParallelConv, ReLU,
                 Sigmoid, StandardConv, TropicalConv, softmax_cross_entropy)
from .tensor import Tensor
from .tropical import ChannelMode, ConvSpec, WindowMode

DEFAULT_H = 1e-3
DEFAULT_TOL = 1e-2
ABS_FLOOR = 1e-5


@dataclass
class SuiteResult:
    name: str
    checked: int
    passed: int

    @property
    def pass_rate(self) -> float:
        return self.passed / self.checked if self.checked else 1.0

    def ok(self, min_rate: float = 0.95) -> bool:
        return self.pass_rate >= min_rate


def _coords_agree(analytic: float, numeric: float, tol: float) -> bool:
    if abs(analytic) <= ABS_FLOOR and abs(numeric) <= ABS_FLOOR:
        return True
    return abs(analytic - numeric) <= tol * max(abs(analytic), abs(numeric))


def fd_compare(arrays, loss_fn, analytic, h: float = DEFAULT_H,
               tol: float = DEFAULT_TOL) -> tuple[int, int]:
    """Count (checked, passed) coordinates across all arrays.

    arrays are mutated in place during probing and restored afterwards;
    loss_fn() must recompute the scalar loss from current array contents.
    """
    checked = passed = 0
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn()
            flat[i] = orig - h
            f_minus = loss_fn()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            checked += 1
            if _coords_agree(float(gflat[i]), numeric, tol):
                passed += 1
    return checked, passed


def check_layer(layer, x: Tensor, rng: np.random.Generator,
                h: float = DEFAULT_H, tol: float = DEFAULT_TOL) -> SuiteResult:
    """Projection-loss finite-difference check of one layer's backward."""
    out, _ = layer.forward(x)
    proj = rng.normal(size=out.shape)

    def loss_fn() -> float:
        y, _ = layer.forward(x)
        return float((proj * y.data.astype(np.float64)).sum())

    out, ctx = layer.forward(x)
    gx, grads = layer.backward(Tensor(proj.astype(np.float32)), ctx)

    names = list(layer.params().keys())
    arrays = [x.data] + [layer.params()[n].data for n in names]
    analytic = [gx.data] + [grads[n].data for n in names]
    checked, passed = fd_compare(arrays, loss_fn, analytic, h, tol)
    return SuiteResult(type(layer).__name__, checked, passed)


def check_loss(rng: np.random.Generator, h: float = DEFAULT_H,
               tol: float = DEFAULT_TOL) -> SuiteResult:
    logits = Tensor(rng.normal(size=(4, 5)).astype(np.float32))
    labels = rng.integers(0, 5, size=4)

    def loss_fn() -> float:
        return softmax_cross_entropy(logits, labels)[0]

    _, grad = softmax_cross_entropy(logits, labels)
    checked, passed = fd_compare([logits.data], loss_fn, [grad.data], h, tol)
    return SuiteResult("softmax_cross_entropy", checked, passed)


def check_model(model: Model, x: Tensor, labels: np.ndarray,
                h: float = DEFAULT_H, tol: float = DEFAULT_TOL) -> SuiteResult:
    """Whole-model check: cross-entropy loss gradient for every parameter."""

    def loss_fn() -> float:
        logits, _ = model.forward(x)
        return softmax_cross_entropy(logits, labels)[0]

    logits, tape = model.forward(x)
    _, grad_logits = softmax_cross_entropy(logits, labels)
    layer_grads, gx = model.backward(tape, grad_logits)

    arrays = [x.data]
    analytic = [gx.data]
    for i, name, tensor in model.parameters():
        arrays.append(tensor.data)
        analytic.append(layer_grads[i][name].data)
    checked, passed = fd_compare(arrays, loss_fn, analytic, h, tol)
    return SuiteResult(f"model:{model.name}", checked, passed)


def _rand_input(rng, shape) -> Tensor:
    return Tensor(rng.normal(size=shape).astype(np.float32))


def run_all(seed: int = 0, h: float = DEFAULT_H, tol: float = DEFAULT_TOL,
            dims=(1, 2, 3)) -> list[SuiteResult]:
    """The full suite: every layer kind, the loss, and a tiny model."""
    rng = np.random.Generator(np.random.PCG64(seed))
    results = []

    def spec_for(dim: int) -> ConvSpec:
        return ConvSpec(dim, 2, 3, (3,) * dim, (1,) * dim, (1,) * dim)

    def input_for(dim: int) -> Tensor:
        return _rand_input(rng, (2, 2) + (5,) * dim)

    for dim in dims:
        spec = spec_for(dim)
        for wmode in WindowMode:
            for cmode in ChannelMode:
                layer = TropicalConv(spec, wmode, cmode, seed=seed + dim)
                res = check_layer(layer, input_for(dim), rng, h, tol)
                res.name = f"tropical_{wmode.value}_{cmode.value}_{dim}d"
                results.append(res)

    spec2 = spec_for(2)
    for mode in MixMode:
        layer = CompoundConv(spec2, mode, seed=seed + 11)
        res = check_layer(layer, input_for(2), rng, h, tol)
        res.name = f"compound_{mode.value}"
        results.append(res)
        layer = ParallelConv(spec2, mode, seed=seed + 12)
        res = check_layer(layer, input_for(2), rng, h, tol)
        res.name = f"parallel_{mode.value}"
        results.append(res)

    res = check_layer(StandardConv(spec2, seed=seed + 13), input_for(2), rng, h, tol)
    res.name = "standard_conv"
    results.append(res)

    res = check_layer(Linear(12, 7, seed=seed + 14), _rand_input(rng, (3, 12)), rng, h, tol)
    res.name = "linear"
    results.append(res)

    res = check_layer(AvgPool(2), _rand_input(rng, (2, 2, 6, 6)), rng, h, tol)
    res.name = "avg_pool"
    results.append(res)

    res = check_layer(Sigmoid(), _rand_input(rng, (3, 10)), rng, h, tol)
    res.name = "sigmoid"
    results.append(res)

    res = check_layer(ReLU(), _rand_input(rng, (3, 10)), rng, h, tol)
    res.name = "relu"
    results.append(res)

    results.append(check_loss(rng, h, tol))

    toy_spec = ConvSpec(2, 1, 2, (2, 2), (1, 1), (0, 0))
    toy = Model(
        [TropicalConv(toy_spec, WindowMode.MIN, ChannelMode.SUM, seed=seed + 15),
         Flatten(),
         Linear(2 * 4 * 4, 3, seed=seed + 16)],
        name="toy", dim=2, num_classes=3, input_shape=(1, 5, 5))
    x = _rand_input(rng, (2, 1, 5, 5))
    labels = rng.integers(0, 3, size=2)
    results.append(check_model(toy, x, labels, h, tol))
    return results
