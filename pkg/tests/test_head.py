import numpy as np
import pytest
import torch

from src.errors import DimensionError
from src.models.fusion import build_fusion_head
from src.models.head import (
    MLPHead,
    build_head,
    count_parameters,
    gradient_check,
    head_forward,
    zero_parameters,
)
from src.models.types import ClassifierHeadConfig, FusionConfig


def test_classifier_head_parameter_count():
    assert count_parameters(build_head(ClassifierHeadConfig(input_dim=768))) == 394_754


def test_fusion_head_parameter_count():
    assert count_parameters(build_fusion_head(768 + 1024, FusionConfig())) == 459_522


def test_zero_head_outputs_zero_logits():
    head = zero_parameters(build_head(ClassifierHeadConfig(input_dim=6)))
    np.testing.assert_array_equal(head_forward(head, np.ones(6)), [0.0, 0.0])


def test_head_forward_shapes_and_dimension_check():
    head = build_head(ClassifierHeadConfig(input_dim=6))
    assert head_forward(head, np.zeros(6)).shape == (2,)
    assert head_forward(head, np.zeros((3, 6))).shape == (3, 2)
    with pytest.raises(DimensionError):
        head_forward(head, np.zeros(5))


def test_eval_forward_is_deterministic_and_restores_mode():
    head = build_head(ClassifierHeadConfig(input_dim=4))
    head.train()
    x = np.arange(4, dtype=np.float32)

    np.testing.assert_array_equal(head_forward(head, x), head_forward(head, x))
    assert head.training


def test_train_mode_dropout_is_unbiased():
    torch.manual_seed(0)
    head = MLPHead(input_dim=3, hidden_dim=512, dropout=0.1)
    x = np.array([0.5, -1.0, 2.0], dtype=np.float32)

    expected = head_forward(head, x)
    samples = np.stack([head_forward(head, x, train_mode=True) for _ in range(4000)])

    # inverted dropout keeps the expectation of the eval-mode logits
    np.testing.assert_allclose(samples.mean(axis=0), expected, atol=0.02)
    assert not np.allclose(samples[0], expected)


@pytest.mark.parametrize("instance", range(20))
def test_classifier_head_gradients_match_finite_differences(instance):
    torch.manual_seed(instance)
    rng = np.random.default_rng(instance)
    input_dim = int(rng.integers(2, 17))
    head = build_head(ClassifierHeadConfig(input_dim=input_dim))
    x = rng.normal(size=(4, input_dim))
    y = rng.integers(0, 2, size=4)

    result = gradient_check(head, x, y, sample=40, seed=instance)

    assert result.checked > 0
    assert result.ok(1e-4), result.relative_errors


@pytest.mark.parametrize("instance", range(20))
def test_fusion_head_gradients_match_finite_differences(instance):
    torch.manual_seed(100 + instance)
    rng = np.random.default_rng(100 + instance)
    head = build_fusion_head(8 + 8, FusionConfig())
    x = rng.normal(size=(4, 16))
    y = rng.integers(0, 2, size=4)

    result = gradient_check(head, x, y, sample=40, seed=instance)

    assert result.checked > 0
    assert result.ok(1e-4), result.relative_errors


def test_gradient_check_leaves_the_module_untouched():
    head = build_head(ClassifierHeadConfig(input_dim=3))
    before = {k: v.clone() for k, v in head.state_dict().items()}
    gradient_check(head, np.ones((2, 3)), np.array([0, 1]), sample=5)

    for k, v in head.state_dict().items():
        assert torch.equal(v, before[k])
        assert v.dtype == torch.float32
