import numpy as np
import pytest

from tcnn.errors import ShapeError
from tcnn.mixed import MixMode
from tcnn.nn import CompoundConv, ParallelConv, ReLU, Sigmoid, StandardConv, TropicalConv
from tcnn.tensor import Tensor
from tcnn.zoo import ModelConfig, VariantId, build, count_parameters, list_variants

from conftest import rng_for

MNIST = dict(dim=2, input_shape=(1, 28, 28), num_classes=10)
CIFAR = dict(dim=2, input_shape=(3, 32, 32), num_classes=10)
ECG = dict(dim=1, input_shape=(1, 187), num_classes=5)

MNIST_COUNTS = {
    VariantId.LENET: 61706,
    VariantId.LENET_RELU: 61706,
    VariantId.F1: 61706,
    VariantId.F2: 61706,
    VariantId.F3: 61706,
    VariantId.C_A: 61808,
    VariantId.C_AB: 61910,
    VariantId.CM_A: 61712,
    VariantId.CM_AB: 61718,
    VariantId.P_A: 64358,
    VariantId.P_AB: 64460,
    VariantId.PM_A: 61862,
    VariantId.PM_AB: 61868,
}

CIFAR_COUNTS = {
    VariantId.LENET: 83126,
    VariantId.F1: 83126,
    VariantId.C_A: 83240,
    VariantId.C_AB: 83354,
    VariantId.CM_A: 83144,
    VariantId.CM_AB: 83162,
    VariantId.P_A: 86090,
    VariantId.P_AB: 86204,
    VariantId.PM_A: 83594,
    VariantId.PM_AB: 83612,
}

ECG_COUNTS = {
    VariantId.LENET: 63339,
    VariantId.F1: 63339,
    VariantId.C_A: 63441,
    VariantId.C_AB: 63543,
    VariantId.CM_A: 63345,
    VariantId.CM_AB: 63351,
    VariantId.P_A: 64209,
    VariantId.P_AB: 64311,
    VariantId.PM_A: 63825,
    VariantId.PM_AB: 63831,
}


class TestParameterCounts:
    @pytest.mark.parametrize("variant,expected", sorted(MNIST_COUNTS.items(),
                                                        key=lambda kv: kv[0].value))
    def test_mnist(self, variant, expected):
        model = build(ModelConfig(variant=variant, seed=0, **MNIST))
        assert count_parameters(model) == expected

    @pytest.mark.parametrize("variant,expected", sorted(CIFAR_COUNTS.items(),
                                                        key=lambda kv: kv[0].value))
    def test_cifar_svhn_shape(self, variant, expected):
        model = build(ModelConfig(variant=variant, seed=0, **CIFAR))
        assert count_parameters(model) == expected

    @pytest.mark.parametrize("variant,expected", sorted(ECG_COUNTS.items(),
                                                        key=lambda kv: kv[0].value))
    def test_ecg_shape(self, variant, expected):
        model = build(ModelConfig(variant=variant, seed=0, **ECG))
        assert count_parameters(model) == expected

    def test_count_invariant_under_seed(self):
        for variant, _ in list_variants():
            counts = {count_parameters(build(ModelConfig(variant=variant, seed=s, **MNIST)))
                      for s in (0, 99)}
            assert len(counts) == 1

    def test_two_param_delta_is_channel_pairs(self):
        # extra beta table: 1*6 + 6*16 = 102 on the 1d plan
        one = count_parameters(build(ModelConfig(variant=VariantId.P_A, seed=0, **ECG)))
        two = count_parameters(build(ModelConfig(variant=VariantId.P_AB, seed=0, **ECG)))
        assert two - one == 102

    def test_parallel_minus_compound_is_kernel_volume(self):
        # second kernel set: 80*1*6 + 3*6*16 = 768 on the 1d plan
        compound = count_parameters(build(ModelConfig(variant=VariantId.C_A, seed=0, **ECG)))
        parallel = count_parameters(build(ModelConfig(variant=VariantId.P_A, seed=0, **ECG)))
        assert parallel - compound == 768

    def test_mixed_first_layer_deltas(self):
        base = count_parameters(build(ModelConfig(variant=VariantId.LENET, seed=0, **ECG)))
        pm = count_parameters(build(ModelConfig(variant=VariantId.PM_A, seed=0, **ECG)))
        cm = count_parameters(build(ModelConfig(variant=VariantId.CM_A, seed=0, **ECG)))
        assert pm - base == 486  # 80*6 second kernel + 6 alphas
        assert cm - base == 6
        pm_ab = count_parameters(build(ModelConfig(variant=VariantId.PM_AB, seed=0, **ECG)))
        assert pm_ab - pm == 6

    def test_fixed_sum_variants_drop_mixing_params(self):
        cc = count_parameters(build(ModelConfig(variant=VariantId.CC, seed=0, **MNIST)))
        assert cc == MNIST_COUNTS[VariantId.LENET]  # same weights, no alpha/beta
        cp = count_parameters(build(ModelConfig(variant=VariantId.CP, seed=0, **MNIST)))
        assert cp == MNIST_COUNTS[VariantId.P_A] - 102


class TestRoster:
    def test_seventeen_variants(self):
        variants = list_variants()
        assert len(variants) == 17
        values = [v.value for v, _ in variants]
        assert "CC" in values and "PM_ab" in values

    def test_stable_ordering(self):
        assert [v.value for v, _ in list_variants()] == \
               [v.value for v, _ in list_variants()]

    def test_layer_kinds_per_variant(self):
        def conv_layers(variant):
            model = build(ModelConfig(variant=variant, seed=0, **MNIST))
            return [l for l in model.layers
                    if isinstance(l, (StandardConv, TropicalConv, CompoundConv, ParallelConv))]

        lenet = conv_layers(VariantId.LENET)
        assert all(isinstance(l, StandardConv) for l in lenet)
        f3 = conv_layers(VariantId.F3)
        assert isinstance(f3[0], TropicalConv) and isinstance(f3[1], StandardConv)
        cm = conv_layers(VariantId.CM_AB)
        assert isinstance(cm[0], CompoundConv) and cm[0].mode is MixMode.TWO_PARAM
        assert isinstance(cm[1], StandardConv)
        cp = conv_layers(VariantId.CP)
        assert all(isinstance(l, ParallelConv) and l.mode is MixMode.FIXED_SUM for l in cp)

    def test_tropical_variants_have_no_conv_activation(self):
        f1 = build(ModelConfig(variant=VariantId.F1, seed=0, **MNIST))
        kinds = [type(l).__name__ for l in f1.layers]
        assert kinds[:2] == ["TropicalConv", "AvgPool"]
        lenet = build(ModelConfig(variant=VariantId.LENET, seed=0, **MNIST))
        kinds = [type(l).__name__ for l in lenet.layers]
        assert kinds[:3] == ["StandardConv", "Sigmoid", "AvgPool"]

    def test_classifier_activations(self):
        lenet = build(ModelConfig(variant=VariantId.LENET, seed=0, **MNIST))
        assert sum(isinstance(l, Sigmoid) for l in lenet.layers) == 4  # 2 conv + 2 linear
        relu = build(ModelConfig(variant=VariantId.F1, seed=0, **MNIST))
        assert sum(isinstance(l, ReLU) for l in relu.layers) == 2  # between linears only


class TestConfig:
    def test_json_roundtrip(self):
        cfg = ModelConfig(variant=VariantId.C_AB, dim=2, input_shape=(1, 28, 28),
                          num_classes=10, seed=7)
        assert ModelConfig.from_json(cfg.to_json()) == cfg

    def test_json_field_names(self):
        import json
        doc = json.loads(ModelConfig(variant=VariantId.F1, seed=0, **MNIST).to_json())
        assert set(doc) == {"variant", "dim", "input_shape", "num_classes", "seed"}

    def test_input_too_small(self):
        with pytest.raises(ShapeError):
            build(ModelConfig(variant=VariantId.LENET, dim=2, input_shape=(1, 6, 6),
                              num_classes=10, seed=0))

    def test_build_deterministic(self):
        a = build(ModelConfig(variant=VariantId.C_AB, seed=5, **MNIST))
        b = build(ModelConfig(variant=VariantId.C_AB, seed=5, **MNIST))
        for (_, _, ta), (_, _, tb) in zip(a.parameters(), b.parameters()):
            assert np.array_equal(ta.data, tb.data)

    def test_forward_shape_all_variants(self):
        x = Tensor(rng_for(31).normal(size=(2, 1, 28, 28)).astype(np.float32))
        for variant, _ in list_variants():
            model = build(ModelConfig(variant=variant, seed=0, **MNIST))
            out, _ = model.forward(x)
            assert out.shape == (2, 10)
