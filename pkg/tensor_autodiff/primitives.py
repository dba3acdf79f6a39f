"""
Differentiable primitives.

Every function here computes a forward value with numpy, records a TapeNode
holding a vector-Jacobian closure, and returns a new Tensor. Inputs that are
not Tensors are wrapped as constants. Elementwise binary primitives broadcast
the way numpy does and sum their gradients back to the input shapes.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from tensor_autodiff.tensor import (
    ShapeMismatchError, Tensor, TapeNode, as_tensor
)


def _record(op: str, inputs: Sequence[Tensor], value, vjp) -> Tensor:
    """
    Records an operation on the tape.

    This function should:
    1. Freeze the forward value.
    2. Keep the vjp closure only if some input needs a gradient.
    3. Return the wrapped node.
    """
    value = np.asarray(value, dtype=np.float64)
    value.setflags(write=False)
    requires_grad = any(t.node.requires_grad for t in inputs)
    node = TapeNode(
        op,
        tuple(t.node for t in inputs),
        value,
        vjp=vjp if requires_grad else None,
        requires_grad=requires_grad
    )
    return Tensor.from_node(node)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sums a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as error:
        raise ShapeMismatchError(op, [a.shape, b.shape]) from error


# ELEMENTWISE ARITHMETIC #


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _record("add", (a, b), a.data + b.data, vjp)


def subtract(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("subtract", a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _record("subtract", (a, b), a.data - b.data, vjp)


def multiply(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("multiply", a, b)

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape)
        )
    return _record("multiply", (a, b), a.data * b.data, vjp)


def divide(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("divide", a, b)

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        )
    return _record("divide", (a, b), a.data / b.data, vjp)


def scale(x, factor: float) -> Tensor:
    """Multiplies by a plain number that is not itself on the tape."""
    x = as_tensor(x)
    factor = float(factor)

    def vjp(g):
        return (g * factor,)
    return _record("scale", (x,), x.data * factor, vjp)


# LINEAR ALGEBRA #


def matmul(a, b) -> Tensor:
    """
    Matrix product for 1-D and 2-D operands (numpy matmul semantics).

    Vectors are promoted to a row (left operand) or a column (right operand)
    for the gradient computation and the promoted axis is dropped again.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) \
            or a.shape[-1] != b.shape[0]:
        raise ShapeMismatchError("matmul", [a.shape, b.shape])

    a2 = a.data if a.ndim == 2 else a.data[None, :]
    b2 = b.data if b.ndim == 2 else b.data[:, None]

    def vjp(g):
        g2 = np.asarray(g).reshape(a2.shape[0], b2.shape[1])
        grad_a = (g2 @ b2.T).reshape(a.shape)
        grad_b = (a2.T @ g2).reshape(b.shape)
        return grad_a, grad_b
    return _record("matmul", (a, b), a.data @ b.data, vjp)


def dot(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeMismatchError("dot", [a.shape, b.shape])

    def vjp(g):
        return g * b.data, g * a.data
    return _record("dot", (a, b), np.dot(a.data, b.data), vjp)


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeMismatchError("transpose", [x.shape], "expected 2-D")

    def vjp(g):
        return (g.T,)
    return _record("transpose", (x,), x.data.T, vjp)


def reshape(x, shape: tuple) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        value = x.data.reshape(shape)
    except ValueError as error:
        raise ShapeMismatchError("reshape", [x.shape, shape]) from error

    def vjp(g):
        return (g.reshape(x.shape),)
    return _record("reshape", (x,), value, vjp)


def conv1d(x, weight) -> Tensor:
    """
    Valid 1-D convolution over positions.

    x has shape (length, channels_in) and weight (width, channels_in,
    channels_out); the output has shape (length - width + 1, channels_out)
    with out[t] = sum_k x[t + k] @ weight[k].
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 3 or x.shape[1] != weight.shape[1] \
            or x.shape[0] < weight.shape[0]:
        raise ShapeMismatchError("conv1d", [x.shape, weight.shape])

    width, channels_in, channels_out = weight.shape
    positions = x.shape[0] - width + 1
    # (positions, width, channels_in) flattened window per output position
    windows = np.stack(
        [x.data[k:k + positions] for k in range(width)], axis=1
    ).reshape(positions, width * channels_in)
    kernel = weight.data.reshape(width * channels_in, channels_out)

    def vjp(g):
        grad_weight = (windows.T @ g).reshape(weight.shape)
        grad_windows = (g @ kernel.T).reshape(positions, width, channels_in)
        grad_x = np.zeros(x.shape)
        for k in range(width):
            grad_x[k:k + positions] += grad_windows[:, k, :]
        return grad_x, grad_weight
    return _record("conv1d", (x, weight), windows @ kernel, vjp)


# NONLINEARITIES #


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    decay = np.exp(-np.abs(x.data))
    value = np.where(
        x.data >= 0.0, 1.0 / (1.0 + decay), decay / (1.0 + decay)
    )

    def vjp(g):
        return (g * value * (1.0 - value),)
    return _record("sigmoid", (x,), value, vjp)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    value = np.tanh(x.data)

    def vjp(g):
        return (g * (1.0 - value * value),)
    return _record("tanh", (x,), value, vjp)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0.0

    def vjp(g):
        return (g * mask,)
    return _record("relu", (x,), np.where(mask, x.data, 0.0), vjp)


def hinge(x) -> Tensor:
    """max(0, x) with subgradient 0 at the kink."""
    x = as_tensor(x)
    mask = x.data > 0.0

    def vjp(g):
        return (g * mask,)
    return _record("hinge", (x,), np.where(mask, x.data, 0.0), vjp)


def absolute(x) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)

    def vjp(g):
        return (g * sign,)
    return _record("abs", (x,), np.abs(x.data), vjp)


def log(x) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        return (g / x.data,)
    return _record("log", (x,), np.log(x.data), vjp)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    value = exps / np.sum(exps, axis=axis, keepdims=True)

    def vjp(g):
        inner = np.sum(g * value, axis=axis, keepdims=True)
        return (value * (g - inner),)
    return _record("softmax", (x,), value, vjp)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    value = shifted - log_norm
    probabilities = np.exp(value)

    def vjp(g):
        return (g - probabilities * np.sum(g, axis=axis, keepdims=True),)
    return _record("log_softmax", (x,), value, vjp)


# REDUCTIONS #


def _expand_reduced(g, shape: tuple, axis) -> np.ndarray:
    g = np.asarray(g)
    if axis is not None:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def reduce_sum(x, axis=None) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        return (np.array(_expand_reduced(g, x.shape, axis)),)
    return _record("sum", (x,), np.sum(x.data, axis=axis), vjp)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    if count == 0:
        raise ShapeMismatchError("mean", [x.shape], "empty reduction")

    def vjp(g):
        return (np.array(_expand_reduced(g, x.shape, axis)) / count,)
    return _record("mean", (x,), np.sum(x.data, axis=axis) / count, vjp)


def l2_norm(x, axis=None) -> Tensor:
    """Euclidean norm; the gradient at the zero vector is taken as zero."""
    x = as_tensor(x)
    value = np.sqrt(np.sum(x.data * x.data, axis=axis))

    def vjp(g):
        norm = _expand_reduced(value, x.shape, axis)
        upstream = _expand_reduced(g, x.shape, axis)
        safe = np.where(norm > 0.0, norm, 1.0)
        return (np.where(norm > 0.0, upstream * x.data / safe, 0.0),)
    return _record("l2_norm", (x,), value, vjp)


def max_pool(x, axis: int = 0) -> Tensor:
    """Max over one axis; ties route the gradient to the first maximum."""
    x = as_tensor(x)
    if x.ndim != 2 or axis not in (0, 1):
        raise ShapeMismatchError("max_pool", [x.shape], "expected 2-D")
    winners = np.argmax(x.data, axis=axis)

    def vjp(g):
        grad = np.zeros(x.shape)
        if axis == 0:
            grad[winners, np.arange(x.shape[1])] = g
        else:
            grad[np.arange(x.shape[0]), winners] = g
        return (grad,)
    return _record("max_pool", (x,), np.max(x.data, axis=axis), vjp)


# STRUCTURE #


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeMismatchError("concat", [], "no inputs")
    try:
        value = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as error:
        raise ShapeMismatchError(
            "concat", [t.shape for t in tensors]
        ) from error
    sizes = [t.shape[axis] for t in tensors]
    boundaries = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, boundaries, axis=axis))
    return _record("concat", tensors, value, vjp)


def gather_rows(table, ids) -> Tensor:
    """Selects rows (or entries of a vector) by integer id; used for lookups."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim not in (1, 2) or ids.ndim != 1 or (
            ids.size and (ids.min() < 0 or ids.max() >= table.shape[0])):
        raise ShapeMismatchError("gather_rows", [table.shape, ids.shape])

    def vjp(g):
        grad = np.zeros(table.shape)
        np.add.at(grad, ids, g)
        return (grad,)
    return _record("gather_rows", (table,), table.data[ids], vjp)


def _segment_counts(op: str, segment_ids, n_segments: int, rows: int):
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape != (rows,) or (
            rows and (segment_ids.min() < 0
                      or segment_ids.max() >= n_segments)):
        raise ShapeMismatchError(op, [(rows,), segment_ids.shape])
    counts = np.bincount(segment_ids, minlength=n_segments)
    return segment_ids, counts


def segment_sum(x, segment_ids, n_segments: int) -> Tensor:
    """Sums the rows of x that share a segment id."""
    x = as_tensor(x)
    segment_ids, _ = _segment_counts(
        "segment_sum", segment_ids, n_segments, x.shape[0]
    )
    value = np.zeros((n_segments,) + x.shape[1:])
    np.add.at(value, segment_ids, x.data)

    def vjp(g):
        return (g[segment_ids],)
    return _record("segment_sum", (x,), value, vjp)


def segment_mean(x, segment_ids, n_segments: int) -> Tensor:
    """Averages the rows of x per segment; every segment must be non-empty."""
    x = as_tensor(x)
    segment_ids, counts = _segment_counts(
        "segment_mean", segment_ids, n_segments, x.shape[0]
    )
    if np.any(counts == 0):
        raise ShapeMismatchError(
            "segment_mean", [x.shape], "empty segment"
        )
    value = np.zeros((n_segments,) + x.shape[1:])
    np.add.at(value, segment_ids, x.data)
    divisor = counts.reshape((-1,) + (1,) * (x.ndim - 1))
    value = value / divisor

    def vjp(g):
        return (g[segment_ids] / divisor[segment_ids],)
    return _record("segment_mean", (x,), value, vjp)


def segment_softmax(x, segment_ids, n_segments: int) -> Tensor:
    """Softmax of a score vector taken separately within each segment."""
    x = as_tensor(x)
    if x.ndim != 1:
        raise ShapeMismatchError("segment_softmax", [x.shape], "expected 1-D")
    segment_ids, _ = _segment_counts(
        "segment_softmax", segment_ids, n_segments, x.shape[0]
    )
    maxima = np.full(n_segments, -np.inf)
    np.maximum.at(maxima, segment_ids, x.data)
    exps = np.exp(x.data - maxima[segment_ids])
    totals = np.zeros(n_segments)
    np.add.at(totals, segment_ids, exps)
    value = exps / totals[segment_ids]

    def vjp(g):
        inner = np.zeros(n_segments)
        np.add.at(inner, segment_ids, g * value)
        return (value * (g - inner[segment_ids]),)
    return _record("segment_softmax", (x,), value, vjp)


def reverse_gradient(x, weight: float) -> Tensor:
    """Identity forward; multiplies the incoming gradient by -weight."""
    x = as_tensor(x)
    weight = float(weight)

    def vjp(g):
        return (-weight * g,)
    return _record("reverse_gradient", (x,), x.data, vjp)


PRIMITIVES = {
    "add": add,
    "subtract": subtract,
    "scale": scale,
    "multiply": multiply,
    "divide": divide,
    "matmul": matmul,
    "conv1d": conv1d,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "log": log,
    "sum": reduce_sum,
    "mean": mean,
    "concat": concat,
    "abs": absolute,
    "hinge": hinge,
    "dot": dot,
    "l2_norm": l2_norm,
    "transpose": transpose,
    "reshape": reshape,
    "max_pool": max_pool,
    "gather_rows": gather_rows,
    "segment_sum": segment_sum,
    "segment_mean": segment_mean,
    "segment_softmax": segment_softmax,
    "reverse_gradient": reverse_gradient,
}


def forward_primitive(kind: str, inputs: Sequence, **options) -> Tensor:
    """
    Runs a primitive by its op-kind tag.

    `concat` takes the whole input list as one argument; every other
    primitive takes the inputs positionally. Keyword options (axis, factor,
    ids, ...) are passed through.
    """
    if kind not in PRIMITIVES:
        raise ValueError(f"Unknown primitive: {kind}")
    function = PRIMITIVES[kind]
    if kind == "concat":
        return function(list(inputs), **options)
    return function(*inputs, **options)
