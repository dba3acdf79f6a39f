"""
Reverse-mode differentiation over a recorded tape, plus a central
finite-difference checker used as the gradient oracle in tests.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional

import numpy as np

from tensor_autodiff.tensor import (
    GradientCheckError, NonScalarRootError, Parameter, TapeNode, Tensor
)


def topological_order(root: TapeNode) -> list[TapeNode]:
    """
    Returns every node reachable from root, inputs before consumers.

    Iterative depth-first search so long chains do not hit the
    recursion limit; the visiting order is fixed by input order.
    """
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for child in reversed(node.inputs):
            if id(child) not in visited:
                stack.append((child, False))
    return order


def backward(
        root: Tensor,
        parameters: Optional[Iterable[Parameter]] = None
) -> dict[str, np.ndarray]:
    """
    Computes d(root)/d(parameter) for every trainable parameter on the tape.

    This function should:
    1. Reject roots that are not scalar-valued.
    2. Reset every node's gradient so repeated calls give identical results.
    3. Walk the tape in reverse topological order applying each vjp.
    4. Sum leaf gradients per parameter name.
    5. Fill zeros for listed parameters the root does not reach.
    """
    if root.size != 1:
        raise NonScalarRootError(
            f"backward needs a scalar root, got shape {root.shape}"
        )

    order = topological_order(root.node)
    for node in order:
        node.grad = np.zeros(node.value.shape)
    root.node.grad = np.ones(root.node.value.shape)

    for node in reversed(order):
        if node.vjp is None:
            continue
        input_grads = node.vjp(node.grad)
        for child, grad in zip(node.inputs, input_grads):
            if grad is None or not child.requires_grad:
                continue
            child.grad = child.grad + grad

    gradients: dict[str, np.ndarray] = {}
    for node in order:
        parameter = node.parameter
        if parameter is None or not parameter.trainable:
            continue
        if parameter.name in gradients:
            gradients[parameter.name] = gradients[parameter.name] + node.grad
        else:
            gradients[parameter.name] = np.array(node.grad)

    for parameter in parameters or ():
        if parameter.trainable and parameter.name not in gradients:
            gradients[parameter.name] = np.zeros(parameter.shape)
    return gradients


def finite_difference_check(
        function: Callable[[], Tensor],
        parameters: list[Parameter],
        step: float = 1e-5,
        entries_per_parameter: Optional[int] = None,
        seed: int = 0
) -> float:
    """
    Compares analytic gradients with central differences.

    `function` rebuilds the scalar loss from the parameters' current values.
    Returns max |analytic - numeric| / max(1, |analytic|) over the checked
    entries. `entries_per_parameter` samples that many entries per parameter
    (seeded) instead of checking all of them.
    """
    if not step > 0:
        raise GradientCheckError(f"step must be positive, got {step}")

    analytic = backward(function(), parameters)
    rng = np.random.default_rng(seed)
    worst = 0.0

    for parameter in parameters:
        if not parameter.trainable:
            continue
        base = np.array(parameter.value)
        indices = list(np.ndindex(base.shape))
        if entries_per_parameter is not None \
                and len(indices) > entries_per_parameter:
            picks = rng.choice(
                len(indices), size=entries_per_parameter, replace=False
            )
            indices = [indices[i] for i in sorted(picks)]

        try:
            for index in indices:
                shifted = base.copy()
                shifted[index] = base[index] + step
                parameter.value = shifted
                upper = function().item()

                shifted[index] = base[index] - step
                parameter.value = shifted
                lower = function().item()

                numeric = (upper - lower) / (2.0 * step)
                exact = float(analytic[parameter.name][index])
                error = abs(exact - numeric) / max(1.0, abs(exact))
                worst = max(worst, error)
        finally:
            parameter.value = base
    return worst
