import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ladderlid.tensor import ShapeError, batch_moments, make_rng, matmul, sample_gaussian, softmax_rows

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_matmul_identity():
    b = np.array([[3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), b), b)


def test_matmul_hand_product():
    out = matmul([[1, 2], [3, 4]], [[5, 6], [7, 8]])
    np.testing.assert_array_equal(out, [[19, 22], [43, 50]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match="2x3.*4x2"):
        matmul(np.ones((2, 3)), np.ones((4, 2)))


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 10**6))
def test_matmul_associative(n, m, p, q, seed):
    r = np.random.default_rng(seed)
    a, b, c = r.normal(size=(n, m)), r.normal(size=(m, p)), r.normal(size=(p, q))
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), atol=1e-9)


def test_softmax_closed_forms():
    np.testing.assert_allclose(softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]], atol=1e-15)
    np.testing.assert_allclose(softmax_rows([[math.log(2), 0.0]]), [[2 / 3, 1 / 3]], atol=1e-15)
    out = softmax_rows([[1000.0, 0.0]])
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-15)


@given(arrays(np.float64, (3, 5), elements=finite), st.lists(finite, min_size=3, max_size=3))
def test_softmax_rows_sum_to_one_and_shift_invariant(z, shift):
    s = softmax_rows(z)
    assert np.all(s >= 0)
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(softmax_rows(z + np.array(shift)[:, None]), s, atol=1e-12)


def test_batch_moments_cases():
    mean, var = batch_moments(np.full((4, 1), 7.0))
    assert mean[0] == 7.0 and var[0] == 0.0
    mean, var = batch_moments([[1.0], [3.0]])
    assert mean[0] == 2.0 and var[0] == 1.0
    row = np.array([[1.5, -2.0, 3.0]])
    mean, var = batch_moments(row)
    np.testing.assert_array_equal(mean, row[0])
    np.testing.assert_array_equal(var, 0.0)
    with pytest.raises(ShapeError):
        batch_moments(np.zeros((0, 3)))


@settings(max_examples=30)
@given(st.integers(2, 30), st.integers(0, 10**6))
def test_batch_moments_of_standardized_data(rows, seed):
    x = np.random.default_rng(seed).normal(3.0, 2.0, size=(rows, 4))
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    mean, var = batch_moments(x)
    np.testing.assert_allclose(mean, 0.0, atol=1e-9)
    np.testing.assert_allclose(var, 1.0, atol=1e-9)


def test_sample_gaussian_zero_sigma():
    np.testing.assert_array_equal(sample_gaussian(make_rng(0), 3, 4, 0.0), np.zeros((3, 4)))


def test_sample_gaussian_rejects_negative_sigma():
    with pytest.raises(ValueError):
        sample_gaussian(make_rng(0), 2, 2, -0.1)


def test_sample_gaussian_stddev_law_of_large_numbers():
    s = sample_gaussian(make_rng(42), 1000, 1000, 0.5)
    assert 0.497 <= s.std() <= 0.503


def test_sample_gaussian_deterministic():
    a = sample_gaussian(make_rng(9), 5, 6, 0.5)
    b = sample_gaussian(make_rng(9), 5, 6, 0.5)
    np.testing.assert_array_equal(a, b)
