"""
Parameter update rules.

This file contains the following:
1. PlainSGD -> p <- p - lr * g.
2. AdaptiveMoment -> first / second moment update with bias correction.
3. make_optimizer -> picks one from a TrainConfig.
"""
from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from tensor_autodiff.tensor import Parameter
from trainer.train_config import TrainConfig


class DivergenceError(RuntimeError):
    """Raised when a loss or gradient stops being finite."""
    def __init__(self, message: str, epoch: Optional[int] = None,
                 batch: Optional[int] = None):
        self.epoch = epoch
        self.batch = batch
        if epoch is not None:
            message = f"epoch {epoch}, batch {batch}: {message}"
        super().__init__(message)


def _check_gradients(parameters: list[Parameter], gradients: dict) -> None:
    for parameter in parameters:
        grad = gradients.get(parameter.name)
        if grad is None:
            continue
        if grad.shape != parameter.shape:
            raise ValueError(
                f"gradient for {parameter.name} has shape {grad.shape}, "
                f"expected {parameter.shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite gradient for {parameter.name}")


class PlainSGD:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, parameters: Iterable[Parameter], gradients: dict) -> None:
        parameters = [p for p in parameters if p.trainable]
        _check_gradients(parameters, gradients)
        for parameter in parameters:
            grad = gradients.get(parameter.name)
            if grad is not None:
                parameter.value = parameter.value - self.learning_rate * grad


class AdaptiveMoment:
    """
    Adam-style update.

    State is kept per parameter name; the step counter is shared so every
    parameter uses the same bias correction.
    """
    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self.first_moment: dict[str, np.ndarray] = {}
        self.second_moment: dict[str, np.ndarray] = {}

    def step(self, parameters: Iterable[Parameter], gradients: dict) -> None:
        """
        Applies one update.

        This function should:
        1. Reject non-finite or mis-shaped gradients before touching anything.
        2. Advance the shared step counter.
        3. Update both moments and apply the bias-corrected step.
        """
        parameters = [p for p in parameters if p.trainable]
        _check_gradients(parameters, gradients)
        self.steps += 1
        first_fix = 1.0 - self.beta1 ** self.steps
        second_fix = 1.0 - self.beta2 ** self.steps

        for parameter in parameters:
            grad = gradients.get(parameter.name)
            if grad is None:
                continue
            name = parameter.name
            first = self.first_moment.get(name, np.zeros(parameter.shape))
            second = self.second_moment.get(name, np.zeros(parameter.shape))
            first = self.beta1 * first + (1.0 - self.beta1) * grad
            second = self.beta2 * second + (1.0 - self.beta2) * grad * grad
            self.first_moment[name] = first
            self.second_moment[name] = second

            update = (first / first_fix) / (
                np.sqrt(second / second_fix) + self.epsilon
            )
            parameter.value = parameter.value - self.learning_rate * update


def make_optimizer(config: TrainConfig):
    if config.optimizer == "plain-sgd":
        return PlainSGD(config.learning_rate)
    return AdaptiveMoment(config.learning_rate)


def optimizer_step(optimizer, parameters: Iterable[Parameter],
                   gradients: dict) -> None:
    """Applies one update in place."""
    optimizer.step(parameters, gradients)
