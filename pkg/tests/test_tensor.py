import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stockcast import tensor as T


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(T.matmul(a, np.eye(2)), a)


def test_matmul_hand_values():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(T.matmul(a, np.array([[5.0], [6.0]])), [[17.0], [39.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(T.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        T.matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_reshape_preserves_row_major_order():
    x = np.arange(10.0)
    y = T.reshape(x, (2, 1, 5, 1))
    assert y.shape == (2, 1, 5, 1)
    np.testing.assert_array_equal(y[0, 0, :, 0], [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(y[1, 0, :, 0], [5, 6, 7, 8, 9])


def test_reshape_count_mismatch():
    with pytest.raises(T.ShapeError, match="10 elements"):
        T.reshape(np.zeros(10), (3, 3))


@pytest.mark.parametrize("op", [T.add, T.sub, T.hadamard])
def test_elementwise_requires_equal_shapes(op):
    with pytest.raises(T.ShapeError):
        op(np.zeros((2, 2)), np.zeros((2, 3)))


def test_elementwise_values():
    a = np.array([1.0, 2.0])
    b = np.array([3.0, 5.0])
    np.testing.assert_array_equal(T.add(a, b), [4, 7])
    np.testing.assert_array_equal(T.sub(a, b), [-2, -3])
    np.testing.assert_array_equal(T.hadamard(a, b), [3, 10])
    np.testing.assert_array_equal(T.scale(a, -2), [-2, -4])


def test_zeros_and_slices():
    z = T.zeros((3, 2))
    assert z.dtype == np.float64 and z.shape == (3, 2) and not z.any()
    with pytest.raises(T.ShapeError):
        T.zeros((0, 2))
    x = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(T.slice_rows(x, 1, 3), x[1:3])
    with pytest.raises(T.ShapeError):
        T.slice_rows(x, 2, 5)


def test_concat():
    a, b = np.ones((2, 3)), np.zeros((1, 3))
    assert T.concat(0, [a, b]).shape == (3, 3)
    with pytest.raises(T.ShapeError):
        T.concat(1, [a, b])


def test_check_finite():
    with pytest.raises(T.NonFiniteError):
        T.check_finite(np.array([1.0, np.nan]), "x")


dims = st.integers(1, 5)


@given(dims, dims, dims)
def test_reshape_round_trip(a, b, c):
    x = np.arange(float(a * b * c)).reshape(a, b, c)
    y = T.reshape(T.reshape(x, (c, a * b)), x.shape)
    np.testing.assert_array_equal(x, y)


@given(dims, dims)
def test_transpose_involution(a, b):
    x = np.random.default_rng(a * 7 + b).normal(size=(a, b))
    assert np.array_equal(T.transpose2d(T.transpose2d(x)), x)


@settings(max_examples=50)
@given(dims, dims, dims, dims, st.integers(0, 2**32 - 1))
def test_matmul_associative(a, b, c, d, seed):
    rng = np.random.default_rng(seed)
    x, y, z = rng.normal(size=(a, b)), rng.normal(size=(b, c)), rng.normal(size=(c, d))
    left = T.matmul(T.matmul(x, y), z)
    right = T.matmul(x, T.matmul(y, z))
    np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-12 * np.abs(left).max())
