import math

import numpy as np
import pytest
import torch

from tumorvision.classifiers import (
    CnnConfig,
    CompoundScaleConfig,
    ConfigError,
    Probabilities,
    ScaledDims,
    build_baseline_cnn,
    build_scaled_classifier,
    classify,
    compound_scale,
    predict_class,
)
from tumorvision.data import TumorClass


def _param_count(model):
    return sum(p.numel() for p in model.net.parameters())


def _state_equal(a, b):
    sa, sb = a.net.state_dict(), b.net.state_dict()
    return set(sa) == set(sb) and all(torch.equal(sa[k], sb[k]) for k in sa)


class TestCompoundScale:
    def test_phi_zero_is_identity(self):
        dims = compound_scale(CompoundScaleConfig(phi=0))
        assert dims == ScaledDims(7, 16, 224)

    def test_depth_arithmetic(self):
        dims = compound_scale(CompoundScaleConfig(phi=1, base_depth=10))
        assert dims.depth == 12

    def test_default_constraint_value(self):
        config = CompoundScaleConfig()
        product = config.alpha * config.beta**2 * config.gamma**2
        assert math.isclose(product, 1.9203, abs_tol=1e-4)
        assert 1.9 <= product <= 2.1

    def test_constraint_violation_rejected(self):
        with pytest.raises(ValueError):
            CompoundScaleConfig(alpha=1.5, beta=1.3, gamma=1.3)

    def test_resolution_is_multiple_of_16(self):
        for phi in (0, 0.5, 1, 2, 3):
            assert compound_scale(CompoundScaleConfig(phi=phi)).resolution % 16 == 0

    def test_monotone_in_phi(self):
        prev = None
        for phi in np.linspace(0, 3, 25):
            dims = compound_scale(CompoundScaleConfig(phi=float(phi)))
            if prev is not None:
                assert dims.depth >= prev.depth
                assert dims.width >= prev.width
                assert dims.resolution >= prev.resolution
            prev = dims


class TestBaselineCnn:
    def test_feature_map_dims(self):
        config = CnnConfig(conv_blocks=((8, 3, True),), fc_width=16, input_size=32)
        model = build_baseline_cnn(config)
        with torch.no_grad():
            features = model.net.features(torch.zeros(1, 1, 32, 32))
        assert features.shape == (1, 8, 16, 16)

    def test_seeded_build_is_bitwise_identical(self):
        config = CnnConfig(input_size=64)
        assert _state_equal(build_baseline_cnn(config, seed=5), build_baseline_cnn(config, seed=5))
        assert not _state_equal(build_baseline_cnn(config, seed=5), build_baseline_cnn(config, seed=6))

    def test_too_many_pool_stages_rejected(self):
        config = CnnConfig(conv_blocks=tuple((8, 3, True) for _ in range(6)), input_size=32)
        with pytest.raises(ConfigError, match="block"):
            build_baseline_cnn(config)


class TestScaledClassifier:
    def test_param_count_grows_with_phi(self):
        base = build_scaled_classifier(compound_scale(CompoundScaleConfig(phi=0)))
        grown = build_scaled_classifier(compound_scale(CompoundScaleConfig(phi=1)))
        assert _param_count(grown) > _param_count(base)

    def test_deterministic_build(self):
        dims = ScaledDims(3, 8, 64)
        assert _state_equal(build_scaled_classifier(dims, seed=1), build_scaled_classifier(dims, seed=1))

    def test_bad_resolution_rejected(self):
        with pytest.raises(ConfigError):
            build_scaled_classifier(ScaledDims(3, 8, 100))

    def test_forward_yields_four_logits(self):
        dims = ScaledDims(3, 8, 64)
        model = build_scaled_classifier(dims)
        with torch.no_grad():
            logits = model.net(torch.zeros(1, 1, 64, 64))
        assert logits.shape == (1, 4)


class TestClassify:
    @pytest.fixture
    def small_model(self):
        return build_baseline_cnn(CnnConfig(conv_blocks=((4, 3, True),), fc_width=8, input_size=32))

    def test_zero_final_layer_gives_uniform(self, small_model):
        with torch.no_grad():
            small_model.net.classifier[-1].weight.zero_()
            small_model.net.classifier[-1].bias.zero_()
        probs = classify(small_model, np.random.default_rng(0).random((32, 32)).astype(np.float32))
        assert np.allclose(probs.values, 0.25, atol=1e-9)

    def test_logit_bias_two(self):
        model = build_baseline_cnn(CnnConfig(conv_blocks=((4, 3, True),), fc_width=8, input_size=32))
        with torch.no_grad():
            model.net.classifier[-1].weight.zero_()
            model.net.classifier[-1].bias.copy_(torch.tensor([2.0, 0.0, 0.0, 0.0]))
        probs = classify(model, np.zeros((32, 32), np.float32))
        expected = math.exp(2) / (math.exp(2) + 3)
        assert abs(probs.values[0] - expected) < 1e-4

    def test_probabilities_contract_random_params(self):
        rng = np.random.default_rng(0)
        config = CnnConfig(conv_blocks=((4, 3, True),), fc_width=8, input_size=32)
        for seed in range(20):
            model = build_baseline_cnn(config, seed=seed)
            probs = classify(model, rng.random((32, 32)).astype(np.float32))
            assert abs(probs.values.sum() - 1) < 1e-6

    def test_resolution_mismatch_rejected(self, small_model):
        with pytest.raises(ValueError, match="32x32"):
            classify(small_model, np.zeros((64, 64), np.float32))


class TestPredictClass:
    def test_unique_argmax(self):
        cls, conf = predict_class(Probabilities(np.array([0.1, 0.7, 0.1, 0.1])))
        assert (cls, conf) == (TumorClass.MENINGIOMA, 0.7)

    def test_tie_breaks_to_lowest_index(self):
        cls, conf = predict_class(Probabilities(np.array([0.25, 0.25, 0.25, 0.25])))
        assert (cls, conf) == (TumorClass.GLIOMA, 0.25)

    def test_degenerate_certainty(self):
        cls, conf = predict_class(Probabilities(np.array([0.0, 0.0, 0.0, 1.0])))
        assert (cls, conf) == (TumorClass.NO_TUMOR, 1.0)

    def test_argmax_invariant_under_logit_scaling(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            logits = rng.normal(size=4)
            p1 = np.exp(logits) / np.exp(logits).sum()
            p2 = np.exp(3 * logits) / np.exp(3 * logits).sum()
            assert predict_class(Probabilities(p1))[0] == predict_class(Probabilities(p2))[0]


class TestProbabilities:
    def test_sum_must_be_one(self):
        with pytest.raises(ValueError):
            Probabilities(np.array([0.5, 0.5, 0.5, 0.5]))

    def test_values_must_be_in_unit_interval(self):
        with pytest.raises(ValueError):
            Probabilities(np.array([-0.5, 0.5, 0.5, 0.5]))
