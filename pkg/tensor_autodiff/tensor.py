"""
Core value types for the autodiff engine.

This file contains the following:
1. Tensor -> an immutable float64 array plus the tape node that produced it.
2. TapeNode -> one recorded operation (op tag, inputs, cached value, gradient).
3. Parameter -> a named, optionally trainable value that models update.
4. constant / detach -> non-differentiable leaves.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when a primitive receives inputs with incompatible shapes."""
    def __init__(self, primitive: str, shapes: list[tuple], detail: str = ""):
        self.primitive = primitive
        self.shapes = [tuple(shape) for shape in shapes]
        message = f"{primitive}: incompatible shapes {self.shapes}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class NonScalarRootError(ValueError):
    """Raised when backward is started from a non-scalar tensor."""


class GradientCheckError(ValueError):
    """Raised for an invalid finite-difference check request."""


def _frozen_array(data) -> np.ndarray:
    """Returns a read-only float64 copy of the given data."""
    array = np.array(data, dtype=np.float64)
    array.setflags(write=False)
    return array


class TapeNode:
    """One recorded operation of a forward pass."""
    __slots__ = (
        "op", "inputs", "value", "grad", "vjp", "requires_grad", "parameter"
    )

    def __init__(
            self,
            op: str,
            inputs: tuple["TapeNode", ...],
            value: np.ndarray,
            vjp: Optional[Callable] = None,
            requires_grad: bool = False,
            parameter: Optional["Parameter"] = None
    ):
        self.op = op
        self.inputs = inputs
        self.value = value
        self.grad = None
        self.vjp = vjp
        self.requires_grad = requires_grad
        self.parameter = parameter

    def __repr__(self) -> str:
        return f"TapeNode(op={self.op!r}, shape={self.value.shape})"


class Tensor:
    """
    Dense float64 array with a reference to the tape node that made it.

    Values are read-only once computed, so a Tensor can be shared between
    threads or kept after the parameters it came from were updated.
    """
    __slots__ = ("node",)

    def __init__(self, data, node: Optional[TapeNode] = None):
        if node is None:
            node = TapeNode("constant", (), _frozen_array(data))
        self.node = node

    @classmethod
    def from_node(cls, node: TapeNode) -> "Tensor":
        """Wraps an already recorded node."""
        tensor = cls.__new__(cls)
        tensor.node = node
        return tensor

    @property
    def data(self) -> np.ndarray:
        return self.node.value

    @property
    def shape(self) -> tuple:
        return self.node.value.shape

    @property
    def ndim(self) -> int:
        return self.node.value.ndim

    @property
    def size(self) -> int:
        return int(self.node.value.size)

    @property
    def requires_grad(self) -> bool:
        return self.node.requires_grad

    def item(self) -> float:
        """Returns the value of a one-element tensor as a float."""
        if self.size != 1:
            raise ShapeMismatchError("item", [self.shape], "expected one element")
        return float(self.node.value.reshape(-1)[0])

    def tolist(self):
        return self.node.value.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.node.op!r})"

    # Operator sugar over the primitives module.

    def __add__(self, other):
        from tensor_autodiff import primitives
        return primitives.add(self, other)

    def __radd__(self, other):
        from tensor_autodiff import primitives
        return primitives.add(other, self)

    def __sub__(self, other):
        from tensor_autodiff import primitives
        return primitives.subtract(self, other)

    def __rsub__(self, other):
        from tensor_autodiff import primitives
        return primitives.subtract(other, self)

    def __mul__(self, other):
        from tensor_autodiff import primitives
        return primitives.multiply(self, other)

    def __rmul__(self, other):
        from tensor_autodiff import primitives
        return primitives.multiply(other, self)

    def __truediv__(self, other):
        from tensor_autodiff import primitives
        return primitives.divide(self, other)

    def __neg__(self):
        from tensor_autodiff import primitives
        return primitives.scale(self, -1.0)

    def __matmul__(self, other):
        from tensor_autodiff import primitives
        return primitives.matmul(self, other)


class Parameter:
    """A named model value; `leaf()` puts it on the tape."""
    def __init__(self, name: str, value, trainable: bool = True):
        self.name = name
        self.trainable = trainable
        self._value = _frozen_array(value)

    @property
    def value(self) -> np.ndarray:
        return self._value

    @value.setter
    def value(self, new_value) -> None:
        self._value = _frozen_array(new_value)

    @property
    def shape(self) -> tuple:
        return self._value.shape

    def leaf(self) -> Tensor:
        """Returns a tape leaf bound to this parameter's current value."""
        node = TapeNode(
            "parameter", (), self._value,
            requires_grad=self.trainable, parameter=self
        )
        return Tensor.from_node(node)

    def copy(self) -> "Parameter":
        return Parameter(self.name, self._value, self.trainable)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def constant(data) -> Tensor:
    """Builds a leaf that never receives a gradient."""
    return Tensor(data)


def detach(tensor: Tensor) -> Tensor:
    """Returns a constant with the same value, cut from the tape."""
    return Tensor.from_node(TapeNode("constant", (), tensor.data))


def as_tensor(value) -> Tensor:
    """Passes tensors through and wraps anything else as a constant."""
    if isinstance(value, Tensor):
        return value
    return constant(value)
