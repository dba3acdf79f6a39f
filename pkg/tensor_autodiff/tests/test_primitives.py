"""
Unit tests for tensor_autodiff/primitives.py
"""
import numpy as np
import pytest
from tensor_autodiff.tensor import (
    Parameter, ShapeMismatchError, constant
)
from tensor_autodiff import primitives as P
from tensor_autodiff.backward import backward, finite_difference_check

# HELPERS FOR BUILDING RANDOM CHECKS #


def away_from_zero(rng, shape, margin=0.1):
    """Normal samples pushed at least `margin` away from the kink at 0."""
    values = rng.normal(size=shape)
    return values + np.sign(values) * margin


def weighted_scalar(out, rng):
    """Reduces any output to a scalar with random weights."""
    weights = constant(rng.normal(size=out.shape))
    return P.reduce_sum(P.multiply(out, weights))


def build_case(kind, rng):
    """
    Returns (function, parameters) exercising one primitive.

    Each function rebuilds the graph from the parameters' current values so
    finite_difference_check can perturb them.
    """
    a = Parameter("a", rng.normal(size=(3, 4)))
    b = Parameter("b", rng.normal(size=(3, 4)))
    w = Parameter("w", rng.normal(size=(4, 2)))
    v = Parameter("v", rng.normal(size=5))
    u = Parameter("u", rng.normal(size=5))
    kinked = Parameter("k", away_from_zero(rng, (3, 4)))
    positive = Parameter("p", rng.uniform(0.5, 2.0, size=(3, 4)))
    signed = Parameter("s", rng.uniform(0.5, 2.0, size=(3, 4))
                       * rng.choice([-1.0, 1.0], size=(3, 4)))
    row = Parameter("r", rng.normal(size=4))
    sequence = Parameter("x", rng.normal(size=(5, 3)))
    kernel = Parameter("kernel", rng.normal(size=(2, 3, 4)))
    weights = rng.normal(size=(3, 4))

    def reduce(out):
        local = np.random.default_rng(99)
        return weighted_scalar(out, local)

    cases = {
        "add": (lambda: reduce(P.add(a.leaf(), row.leaf())), [a, row]),
        "subtract": (lambda: reduce(P.subtract(a.leaf(), b.leaf())), [a, b]),
        "scale": (lambda: reduce(P.scale(a.leaf(), -1.7)), [a]),
        "multiply": (lambda: reduce(P.multiply(a.leaf(), b.leaf())), [a, b]),
        "divide": (lambda: reduce(P.divide(a.leaf(), signed.leaf())),
                   [a, signed]),
        "matmul": (lambda: reduce(P.matmul(a.leaf(), w.leaf())), [a, w]),
        "matmul_vector": (lambda: reduce(P.matmul(row.leaf(), w.leaf())),
                          [row, w]),
        "conv1d": (lambda: reduce(P.conv1d(sequence.leaf(), kernel.leaf())),
                   [sequence, kernel]),
        "sigmoid": (lambda: reduce(P.sigmoid(a.leaf())), [a]),
        "tanh": (lambda: reduce(P.tanh(a.leaf())), [a]),
        "relu": (lambda: reduce(P.relu(kinked.leaf())), [kinked]),
        "softmax": (lambda: reduce(P.softmax(a.leaf(), axis=-1)), [a]),
        "log_softmax": (lambda: reduce(P.log_softmax(a.leaf())), [a]),
        "log": (lambda: reduce(P.log(positive.leaf())), [positive]),
        "sum": (lambda: reduce(P.reduce_sum(a.leaf(), axis=0)), [a]),
        "mean": (lambda: reduce(P.mean(a.leaf(), axis=1)), [a]),
        "concat": (lambda: reduce(P.concat([a.leaf(), b.leaf()], axis=1)),
                   [a, b]),
        "abs": (lambda: reduce(P.absolute(kinked.leaf())), [kinked]),
        "hinge": (lambda: reduce(P.hinge(kinked.leaf())), [kinked]),
        "dot": (lambda: P.dot(v.leaf(), u.leaf()), [v, u]),
        "l2_norm": (lambda: reduce(P.l2_norm(a.leaf(), axis=1)), [a]),
        "transpose": (lambda: reduce(P.transpose(a.leaf())), [a]),
        "reshape": (lambda: reduce(P.reshape(a.leaf(), (2, 6))), [a]),
        "max_pool": (lambda: reduce(P.max_pool(a.leaf(), axis=0)), [a]),
        "gather_rows": (lambda: reduce(P.gather_rows(a.leaf(), [2, 0, 2])),
                        [a]),
        "segment_sum": (lambda: reduce(
            P.segment_sum(v.leaf(), [0, 1, 1, 2, 2], 3)), [v]),
        "segment_mean": (lambda: reduce(
            P.segment_mean(sequence.leaf(), [0, 0, 1, 2, 2], 3)),
            [sequence]),
        "segment_softmax": (lambda: reduce(
            P.segment_softmax(v.leaf(), [0, 0, 1, 1, 1], 2)), [v]),
        "weighted_sum": (lambda: P.reduce_sum(
            P.multiply(a.leaf(), constant(weights))), [a]),
    }
    return cases[kind]


GRADIENT_CASES = [
    "add", "subtract", "scale", "multiply", "divide", "matmul",
    "matmul_vector", "conv1d", "sigmoid", "tanh", "relu", "softmax",
    "log_softmax", "log", "sum", "mean", "concat", "abs", "hinge", "dot",
    "l2_norm", "transpose", "reshape", "max_pool", "gather_rows",
    "segment_sum", "segment_mean", "segment_softmax", "weighted_sum",
]

# TESTS FOR ANALYTIC VALUES #


def test_sigmoid_at_zero():
    """
    Test the analytic value and derivative of sigmoid at 0.

    This function tests the following:
    1. sigmoid(0) is exactly 0.5.
    2. d/dx sigmoid(x) at 0 is 0.25.
    """
    x = Parameter("x", 0.0)
    out = P.sigmoid(x.leaf())

    assert out.item() == 0.5  # Test 1.
    assert backward(out)["x"] == pytest.approx(0.25)  # Test 2.


def test_sigmoid_stays_in_open_interval():
    """Test that sigmoid outputs lie strictly inside (0, 1)."""
    out = P.sigmoid(constant(np.linspace(-30.0, 30.0, 61)))

    assert np.all(out.data > 0.0)
    assert np.all(out.data < 1.0)


def test_softmax_symmetric_and_normalised():
    """
    Test softmax on symmetric and random inputs.

    This function tests the following:
    1. softmax([0, 0, 0]) is uniform.
    2. Random rows sum to 1 within 1e-12.
    """
    uniform = P.softmax(constant([0.0, 0.0, 0.0]))
    assert np.allclose(uniform.data, [1 / 3, 1 / 3, 1 / 3])  # Test 1.

    rng = np.random.default_rng(3)
    rows = P.softmax(constant(rng.normal(scale=5.0, size=(20, 7))), axis=1)
    assert np.all(np.abs(rows.data.sum(axis=1) - 1.0) < 1e-12)  # Test 2.


def test_matmul_identity():
    """Test that I3 @ A returns A exactly."""
    a = np.random.default_rng(0).normal(size=(3, 3))
    out = P.matmul(constant(np.eye(3)), constant(a))

    assert np.array_equal(out.data, a)


def test_conv1d_width_one_is_linear_map():
    """Test that a width-1 convolution over one position is x @ W[0]."""
    rng = np.random.default_rng(5)
    x = rng.normal(size=(1, 4))
    kernel = rng.normal(size=(1, 4, 3))
    out = P.conv1d(constant(x), constant(kernel))

    assert np.allclose(out.data, x @ kernel[0])


def test_hinge_subgradient_at_kink():
    """Test that hinge passes zero gradient at exactly 0."""
    x = Parameter("x", [0.0, 1.0, -1.0])
    gradients = backward(P.reduce_sum(P.hinge(x.leaf())))

    assert gradients["x"].tolist() == [0.0, 1.0, 0.0]


def test_reverse_gradient_flips_sign():
    """
    Test the gradient reversal primitive.

    This function tests the following:
    1. The forward pass is the identity.
    2. The gradient is -weight times the plain gradient.
    3. Weight 0 yields a zero gradient.
    """
    x = Parameter("x", [1.0, -2.0, 3.0])
    out = P.reverse_gradient(x.leaf(), 0.5)
    assert np.array_equal(out.data, x.value)  # Test 1.

    gradients = backward(P.reduce_sum(P.scale(out, 2.0)))
    assert gradients["x"].tolist() == [-1.0, -1.0, -1.0]  # Test 2.

    zero = backward(P.reduce_sum(P.reverse_gradient(x.leaf(), 0.0)))
    assert np.all(zero["x"] == 0.0)  # Test 3.


def test_segment_softmax_single_slot_weight_is_one():
    """Test that a segment with one entry gets attention weight exactly 1."""
    out = P.segment_softmax(constant([3.0, -1.0, 2.0]), [0, 1, 1], 2)

    assert out.data[0] == 1.0
    assert out.data[1] + out.data[2] == pytest.approx(1.0)


def test_max_pool_routes_to_first_maximum():
    """Test that tied maxima send the gradient to the first position."""
    x = Parameter("x", [[1.0, 5.0], [1.0, 2.0]])
    gradients = backward(P.reduce_sum(P.max_pool(x.leaf(), axis=0)))

    assert gradients["x"].tolist() == [[1.0, 1.0], [0.0, 0.0]]

# TESTS FOR SHAPE ERRORS #


@pytest.mark.parametrize("build", [
    lambda: P.add(constant(np.ones((2, 3))), constant(np.ones((4, 3)))),
    lambda: P.matmul(constant(np.ones((2, 3))), constant(np.ones((2, 3)))),
    lambda: P.conv1d(constant(np.ones((1, 3))), constant(np.ones((2, 3, 1)))),
    lambda: P.dot(constant(np.ones(3)), constant(np.ones(4))),
    lambda: P.concat([constant(np.ones((2, 3))), constant(np.ones((2, 4)))]),
])
def test_shape_mismatch_names_primitive(build):
    """Test that invalid shapes raise ShapeMismatchError naming the op."""
    with pytest.raises(ShapeMismatchError) as info:
        build()

    assert info.value.primitive in str(info.value)
    assert len(info.value.shapes) >= 1


def test_forward_primitive_dispatch():
    """
    Test dispatch by op-kind tag.

    This function tests the following:
    1. A known tag runs the primitive and records its tag.
    2. An unknown tag is rejected.
    """
    out = P.forward_primitive("add", [constant(1.0), constant(2.0)])
    assert out.item() == 3.0  # Test 1.
    assert out.node.op == "add"  # Test 1.

    with pytest.raises(ValueError):
        P.forward_primitive("fft", [constant(1.0)])  # Test 2.

# TESTS FOR GRADIENT CORRECTNESS #


@pytest.mark.parametrize("kind", GRADIENT_CASES)
def test_primitive_gradients_match_finite_differences(kind):
    """Test every primitive against central differences on 100 seeds."""
    for seed in range(100):
        function, parameters = build_case(kind, np.random.default_rng(seed))
        error = finite_difference_check(function, parameters, step=1e-5)
        assert error < 1e-4, f"{kind} failed on seed {seed}: {error}"
