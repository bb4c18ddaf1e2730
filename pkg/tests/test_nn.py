import numpy as np
import pytest

from tcnn.errors import ShapeError
from tcnn.mixed import MixMode
from tcnn.nn import (AvgPool, CompoundConv, Flatten, Linear, Model, ParallelConv,
                     ReLU, Sigmoid, StandardConv, TropicalConv, softmax_cross_entropy)
from tcnn.tensor import Tensor
from tcnn.tropical import ChannelMode, ConvSpec, WindowMode

import oracle
from conftest import random_conv_case, rng_for


class TestStandardConv:
    def test_identity_1x1(self):
        spec = ConvSpec(2, 1, 1, (1, 1), (1, 1), (0, 0))
        layer = StandardConv(spec, seed=0)
        layer.weights.data[...] = 1.0
        layer.bias.data[...] = 0.0
        x = Tensor(rng_for(0).normal(size=(2, 1, 3, 3)).astype(np.float32))
        out, _ = layer.forward(x)
        np.testing.assert_allclose(out.data, x.data, rtol=1e-6)

    def test_hand_case(self):
        spec = ConvSpec(2, 1, 1, (2, 2), (1, 1), (0, 0))
        layer = StandardConv(spec, seed=0)
        layer.weights.data[...] = np.array([[[[1, 0], [0, 1]]]], dtype=np.float32)
        layer.bias.data[...] = 0.0
        x = Tensor(np.array([[[[1, 2], [3, 4]]]], dtype=np.float32))
        out, _ = layer.forward(x)
        assert out.data.ravel().tolist() == [5.0]

    def test_matches_oracle_with_zero_padding(self):
        rng = rng_for(21)
        for _ in range(8):
            x, w, spec = random_conv_case(rng)
            layer = StandardConv(spec, seed=1)
            layer.weights.data[...] = w
            bias = rng.normal(size=(spec.out_channels,)).astype(np.float32)
            layer.bias.data[...] = bias
            out, _ = layer.forward(Tensor(x))
            ref = oracle.standard_conv(x, w, bias, spec.stride, spec.padding)
            np.testing.assert_allclose(out.data, ref, rtol=1e-4, atol=1e-4)

    def test_backward_shapes_and_bias(self):
        spec = ConvSpec(1, 2, 3, (2,), (1,), (0,))
        layer = StandardConv(spec, seed=2)
        x = Tensor(rng_for(3).normal(size=(4, 2, 6)).astype(np.float32))
        out, ctx = layer.forward(x)
        g = Tensor(np.ones(out.shape, dtype=np.float32))
        gx, grads = layer.backward(g, ctx)
        assert gx.shape == x.shape
        assert grads["weights"].shape == layer.weights.shape
        # bias grad = sum of upstream over batch and positions
        assert grads["bias"].data.tolist() == [4.0 * 5] * 3


class TestAvgPool:
    def test_mean(self):
        layer = AvgPool(1)
        x = Tensor(np.array([[[1.0, 3.0]]], dtype=np.float32))
        out, _ = layer.forward(x)
        assert out.data.ravel().tolist() == [2.0]

    def test_constant_input(self):
        layer = AvgPool(2)
        x = Tensor(np.full((1, 2, 4, 4), 7.0, dtype=np.float32))
        out, _ = layer.forward(x)
        assert np.all(out.data == 7.0)

    def test_backward_distributes_uniformly(self):
        layer = AvgPool(1)
        x = Tensor(np.array([[[1.0, 3.0]]], dtype=np.float32))
        out, ctx = layer.forward(x)
        gx, _ = layer.backward(Tensor(np.ones(out.shape, dtype=np.float32)), ctx)
        assert gx.data.ravel().tolist() == [0.5, 0.5]

    def test_matches_oracle(self):
        rng = rng_for(22)
        x = rng.normal(size=(2, 3, 7, 5)).astype(np.float32)
        out, _ = AvgPool(2).forward(Tensor(x))
        ref = oracle.avg_pool(x, (2, 2), (2, 2))
        np.testing.assert_allclose(out.data, ref, rtol=1e-5, atol=1e-6)


class TestActivations:
    def test_sigmoid_at_zero(self):
        out, _ = Sigmoid().forward(Tensor(np.zeros((1, 1), dtype=np.float32)))
        assert out.data.ravel().tolist() == [0.5]

    def test_sigmoid_extremes_stable(self):
        out, _ = Sigmoid().forward(Tensor(np.array([[-100.0, 100.0]], dtype=np.float32)))
        assert np.all(np.isfinite(out.data))

    def test_relu(self):
        layer = ReLU()
        out, ctx = layer.forward(Tensor(np.array([[-3.0, 2.0]], dtype=np.float32)))
        assert out.data.ravel().tolist() == [0.0, 2.0]
        gx, _ = layer.backward(Tensor(np.ones((1, 2), dtype=np.float32)), ctx)
        assert gx.data.ravel().tolist() == [0.0, 1.0]


class TestLinear:
    def test_identity(self):
        layer = Linear(3, 3, seed=0)
        layer.weights.data[...] = np.eye(3, dtype=np.float32)
        layer.bias.data[...] = 0.0
        x = Tensor(np.array([[1.0, 2.0, 3.0]], dtype=np.float32))
        out, _ = layer.forward(x)
        assert out.data.ravel().tolist() == [1.0, 2.0, 3.0]

    def test_scalar_affine(self):
        layer = Linear(1, 1, seed=0)
        layer.weights.data[...] = 2.0
        layer.bias.data[...] = 1.0
        out, _ = layer.forward(Tensor(np.array([[3.0]], dtype=np.float32)))
        assert out.data.ravel().tolist() == [7.0]

    def test_backward(self):
        layer = Linear(2, 2, seed=1)
        x = Tensor(np.array([[1.0, 2.0]], dtype=np.float32))
        out, ctx = layer.forward(x)
        g = Tensor(np.array([[1.0, 0.0]], dtype=np.float32))
        gx, grads = layer.backward(g, ctx)
        np.testing.assert_allclose(gx.data, layer.weights.data[:, 0][None], rtol=1e-6)
        np.testing.assert_allclose(grads["weights"].data[:, 0], [1.0, 2.0], rtol=1e-6)
        assert grads["bias"].data.tolist() == [1.0, 0.0]


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        logits = Tensor(np.zeros((2, 10), dtype=np.float32))
        loss, _ = softmax_cross_entropy(logits, np.array([3, 7]))
        assert abs(loss - np.log(10)) < 1e-6

    def test_confident_correct_low_loss(self):
        logits = np.full((1, 4), -50.0, dtype=np.float32)
        logits[0, 2] = 50.0
        loss, _ = softmax_cross_entropy(Tensor(logits), np.array([2]))
        assert loss < 1e-6

    def test_grad_rows_sum_to_zero(self):
        rng = rng_for(23)
        logits = Tensor(rng.normal(size=(5, 7)).astype(np.float32))
        _, grad = softmax_cross_entropy(logits, rng.integers(0, 7, size=5))
        np.testing.assert_allclose(grad.data.sum(axis=1), 0.0, atol=1e-6)


class TestModel:
    def test_flatten_only_model_is_reshape(self):
        model = Model([Flatten()], name="flat", dim=2, num_classes=4,
                      input_shape=(1, 2, 2))
        x = Tensor(rng_for(1).normal(size=(3, 1, 2, 2)).astype(np.float32))
        out, _ = model.forward(x)
        assert np.array_equal(out.data, x.data.reshape(3, 4))

    def test_shape_validation_at_build(self):
        with pytest.raises(ShapeError):
            Model([Flatten(), Linear(5, 3, seed=0)], name="bad", dim=2,
                  num_classes=3, input_shape=(1, 2, 2))

    def test_declared_shapes_match_runtime(self):
        spec = ConvSpec(2, 1, 2, (3, 3), (1, 1), (1, 1))
        model = Model(
            [TropicalConv(spec, WindowMode.MIN, ChannelMode.SUM, seed=0),
             AvgPool(2), Flatten(), Linear(2 * 2 * 2, 3, seed=1)],
            name="tiny", dim=2, num_classes=3, input_shape=(1, 4, 4))
        x = Tensor(rng_for(2).normal(size=(2, 1, 4, 4)).astype(np.float32))
        out = x
        tape = []
        for i, layer in enumerate(model.layers):
            out, ctx = layer.forward(out)
            assert out.shape[1:] == model.layer_shapes[i + 1]
            tape.append(ctx)

    def test_backward_produces_grads_for_all_params(self):
        spec = ConvSpec(1, 1, 2, (2,), (1,), (0,))
        model = Model(
            [CompoundConv(spec, MixMode.TWO_PARAM, seed=0), Flatten(),
             Linear(2 * 4, 3, seed=1)],
            name="tiny1d", dim=1, num_classes=3, input_shape=(1, 5))
        x = Tensor(rng_for(3).normal(size=(2, 1, 5)).astype(np.float32))
        logits, tape = model.forward(x)
        loss, grad = softmax_cross_entropy(logits, np.array([0, 2]))
        grads, gx = model.backward(tape, grad)
        assert gx.shape == x.shape
        for i, name, tensor in model.parameters():
            assert grads[i][name].shape == tensor.shape

    def test_wrong_input_shape_rejected(self):
        model = Model([Flatten()], name="flat", dim=1, num_classes=6,
                      input_shape=(2, 3))
        with pytest.raises(ShapeError):
            model.forward(Tensor(np.zeros((1, 3, 2), dtype=np.float32)))


def test_parallel_layer_params_include_two_kernels():
    spec = ConvSpec(2, 2, 3, (2, 2), (1, 1), (0, 0))
    layer = ParallelConv(spec, MixMode.TWO_PARAM, seed=0)
    names = set(layer.params())
    assert names == {"w1", "w2", "bias", "alpha", "beta"}
    fixed = ParallelConv(spec, MixMode.FIXED_SUM, seed=0)
    assert set(fixed.params()) == {"w1", "w2", "bias"}
