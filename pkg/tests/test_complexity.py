from fractions import Fraction

import numpy as np
import pytest
import sympy

from tcnn.complexity import (DEFAULT_THETA, LayerKind, OpCount, count_layer,
                             count_model, ratios_vs_standard, unified)
from tcnn.errors import DomainError
from tcnn.tropical import ConvSpec
from tcnn.zoo import ModelConfig, VariantId, build

from conftest import rng_for

# independent symbolic statements of the documented closed forms
K, C, CO, P = sympy.symbols("K C CO P", positive=True, integer=True)
SYMBOLIC = {
    LayerKind.STANDARD_CONV: (K * C * CO * P, (C - 1) * CO * P * (K - 1), 0),
    LayerKind.TROPICAL_SUM: (0, (C - 1 + C * K) * CO * P, (K - 1) * C * CO * P),
    LayerKind.TROPICAL_EXTREME: (0, C * K * CO * P, (K * C - 1) * CO * P),
    LayerKind.COMPOUND: (2 * C * CO * P, (K * C + 2 * C - 1) * CO * P,
                         2 * (K - 1) * C * CO * P),
    LayerKind.PARALLEL: (2 * C * CO * P, (2 * K * C + 2 * C - 1) * CO * P,
                         2 * (K - 1) * C * CO * P),
}


def random_spec(rng):
    dim = int(rng.integers(1, 4))
    kernel = tuple(int(rng.integers(1, 6)) for _ in range(dim))
    spec = ConvSpec(dim, int(rng.integers(1, 8)), int(rng.integers(1, 8)),
                    kernel, (1,) * dim, (0,) * dim)
    out_spatial = tuple(int(rng.integers(1, 12)) for _ in range(dim))
    return spec, out_spatial


class TestClosedForms:
    @pytest.mark.parametrize("kind", sorted(SYMBOLIC, key=lambda k: k.value))
    def test_matches_symbolic_on_sampled_specs(self, kind):
        rng = rng_for(41)
        for _ in range(20):
            spec, outs = random_spec(rng)
            got = count_layer(kind, spec, outs)
            subs = {K: int(np.prod(spec.kernel)), C: spec.in_channels,
                    CO: spec.out_channels, P: int(np.prod(outs))}
            em, ea, ec = (int(sympy.Integer(expr).subs(subs) if isinstance(expr, int)
                          else expr.subs(subs)) for expr in SYMBOLIC[kind])
            assert (got.mults, got.adds, got.comparisons) == (em, ea, ec)

    def test_mnist_conv1_example(self):
        spec = ConvSpec(2, 1, 6, (5, 5), (1, 1), (2, 2))
        got = count_layer(LayerKind.STANDARD_CONV, spec, (14, 14))
        assert got.mults == 25 * 1 * 6 * 196 == 29400
        compound = count_layer(LayerKind.COMPOUND, spec, (14, 14))
        assert compound.mults == 2352
        assert Fraction(compound.mults, got.mults) == Fraction(2, 25)

    def test_tropical_never_multiplies(self):
        rng = rng_for(42)
        for _ in range(20):
            spec, outs = random_spec(rng)
            for kind in (LayerKind.TROPICAL_SUM, LayerKind.TROPICAL_EXTREME,
                         LayerKind.COMPOUND_FIXED, LayerKind.PARALLEL_FIXED):
                assert count_layer(kind, spec, outs).mults == 0

    def test_compound_mult_ratio_exact(self):
        rng = rng_for(43)
        for _ in range(20):
            spec, outs = random_spec(rng)
            std = count_layer(LayerKind.STANDARD_CONV, spec, outs)
            comp = count_layer(LayerKind.COMPOUND, spec, outs)
            assert Fraction(comp.mults, std.mults) == Fraction(2, int(np.prod(spec.kernel)))

    def test_exact_standard_mode(self):
        spec = ConvSpec(2, 3, 4, (3, 3), (1, 1), (0, 0))
        default = count_layer(LayerKind.STANDARD_CONV, spec, (5, 5))
        exact = count_layer(LayerKind.STANDARD_CONV, spec, (5, 5), exact_standard=True)
        assert default.adds == 2 * 8 * 4 * 25
        assert exact.adds == (3 * 9 - 1) * 4 * 25
        assert exact.adds > default.adds

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError):
            count_layer("conv", ConvSpec(1, 1, 1, (1,), (1,), (0,)), (1,))


class TestUnified:
    def test_direct(self):
        assert unified(OpCount(2, 3, 4), 10) == 27

    def test_zero(self):
        assert unified(OpCount(0, 0, 0)) == 0

    def test_theta_one_plain_sum(self):
        assert unified(OpCount(5, 7, 11), 1) == 23

    def test_default_theta_is_ten(self):
        assert DEFAULT_THETA == 10

    def test_bad_theta(self):
        with pytest.raises(DomainError):
            unified(OpCount(1, 1, 1), 0)


class TestModelCounts:
    def test_additivity(self):
        model = build(ModelConfig(variant=VariantId.C_A, dim=2,
                                  input_shape=(1, 28, 28), num_classes=10, seed=0))
        cost = count_model(model)
        total = OpCount(0, 0, 0)
        for row in cost.rows:
            total = total + row.count
        assert total == cost.total
        assert cost.omega_u == unified(total)

    def test_empty_model_all_zeros(self):
        from tcnn.nn import Model
        model = Model([], name="empty", dim=1, num_classes=4, input_shape=(4,))
        cost = count_model(model)
        assert cost.rows == []
        assert cost.total == OpCount(0, 0, 0)
        assert cost.omega_u == 0

    def test_batch_scales_linearly(self):
        model = build(ModelConfig(variant=VariantId.F1, dim=2,
                                  input_shape=(1, 28, 28), num_classes=10, seed=0))
        one = count_model(model, batch=1).total
        four = count_model(model, batch=4).total
        assert four == one.scale(4)

    def test_table_ordering_mnist(self):
        def omega(variant):
            model = build(ModelConfig(variant=variant, dim=2,
                                      input_shape=(1, 28, 28), num_classes=10, seed=0))
            return count_model(model).omega_u

        assert omega(VariantId.F1) < omega(VariantId.C_A)
        assert omega(VariantId.C_A) < omega(VariantId.CM_A)
        assert omega(VariantId.CM_A) < omega(VariantId.LENET)
        assert omega(VariantId.C_A) < omega(VariantId.LENET_RELU)

    def test_compound_vs_parallel_components(self):
        def totals(variant):
            model = build(ModelConfig(variant=variant, dim=2,
                                      input_shape=(1, 28, 28), num_classes=10, seed=0))
            return count_model(model).total

        comp, par = totals(VariantId.C_A), totals(VariantId.P_A)
        assert comp.mults == par.mults
        assert comp.comparisons == par.comparisons
        assert par.adds > comp.adds


class TestRatios:
    def test_sum_variant_example(self):
        spec = ConvSpec(2, 3, 8, (5, 5), (1, 1), (0, 0))
        r = ratios_vs_standard(spec)
        assert r["tropical_sum_addition"] == Fraction(77, 2)  # 1 + 75/2 = 38.5
        assert r["compound_multiplication"] == Fraction(2, 25)
        assert not r["degenerate"]

    def test_single_channel_flagged(self):
        r = ratios_vs_standard(ConvSpec(2, 1, 4, (5, 5), (1, 1), (0, 0)))
        assert r["degenerate"]
        assert r["tropical_sum_addition"] is None

    def test_parallel_addition_ratio(self):
        spec = ConvSpec(1, 2, 4, (3,), (1,), (0,))
        r = ratios_vs_standard(spec)
        assert r["parallel_addition"] == Fraction(2 * 3 * 2 + 2 * 2 - 1, (2 - 1) * (3 - 1))
