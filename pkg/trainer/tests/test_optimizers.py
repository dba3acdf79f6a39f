"""
Unit tests for trainer/optimizers.py
"""
import math

import numpy as np
import pytest
from tensor_autodiff.tensor import Parameter
from trainer.optimizers import (
    AdaptiveMoment, DivergenceError, PlainSGD, make_optimizer, optimizer_step
)
from trainer.train_config import TrainConfig


@pytest.mark.parametrize("optimizer", [PlainSGD(0.1), AdaptiveMoment(0.1)])
def test_zero_gradient_leaves_parameters(optimizer):
    parameter = Parameter("w", [[1.0, -2.0], [0.5, 3.0]])
    optimizer_step(optimizer, [parameter], {"w": np.zeros((2, 2))})

    assert np.array_equal(parameter.value, [[1.0, -2.0], [0.5, 3.0]])


def test_plain_sgd_step():
    parameter = Parameter("p", 0.0)
    PlainSGD(0.1).step([parameter], {"p": np.array(1.0)})

    assert parameter.value == pytest.approx(-0.1, abs=1e-15)


def test_adaptive_moment_first_steps():
    """
    Test the first two adaptive-moment updates on a scalar.

    This function tests the following:
    1. Step 1 moves by lr * 1 / (1 + eps) for g = 1.
    2. Step 2 with g = 3 matches a hand computation of the moments.
    """
    learning_rate, eps = 0.01, 1e-8
    parameter = Parameter("p", 0.0)
    optimizer = AdaptiveMoment(learning_rate, epsilon=eps)

    optimizer.step([parameter], {"p": np.array(1.0)})
    assert parameter.value == pytest.approx(-learning_rate / (1 + eps),
                                            rel=1e-12)  # Test 1.

    optimizer.step([parameter], {"p": np.array(3.0)})
    first = 0.9 * 0.1 + 0.1 * 3.0
    second = 0.999 * 0.001 + 0.001 * 9.0
    step = (first / (1 - 0.9 ** 2)) / (math.sqrt(second / (1 - 0.999 ** 2)) + eps)
    expected = -learning_rate / (1 + eps) - learning_rate * step
    assert parameter.value == pytest.approx(expected, rel=1e-12)  # Test 2.


def test_non_finite_gradient_aborts():
    """Test that a NaN gradient raises before any parameter moves."""
    first = Parameter("a", [1.0, 2.0])
    second = Parameter("b", [3.0])
    optimizer = AdaptiveMoment(0.1)

    with pytest.raises(DivergenceError):
        optimizer.step([first, second],
                       {"a": np.array([0.5, 0.5]), "b": np.array([np.nan])})
    assert np.array_equal(first.value, [1.0, 2.0])
    assert optimizer.steps == 0


def test_gradient_shape_checked():
    parameter = Parameter("w", np.zeros((2, 3)))
    with pytest.raises(ValueError):
        PlainSGD(0.1).step([parameter], {"w": np.zeros((3, 2))})


def test_frozen_parameter_untouched():
    parameter = Parameter("w", [1.0], trainable=False)
    PlainSGD(0.1).step([parameter], {"w": np.array([5.0])})

    assert parameter.value[0] == 1.0


def test_make_optimizer_follows_config():
    assert isinstance(make_optimizer(TrainConfig(optimizer="plain-sgd")), PlainSGD)
    chosen = make_optimizer(TrainConfig(learning_rate=0.05))
    assert isinstance(chosen, AdaptiveMoment)
    assert chosen.learning_rate == 0.05
