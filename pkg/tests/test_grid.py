import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erd.grid import (as_field, axpy, check_finite, check_same_shape, dot, forward, inverse,
                      map2, new_constant, norm2, zeros_hessian, zeros_vector)


def test_new_constant_examples():
    assert np.array_equal(new_constant(2, 2, 0.0), np.zeros((2, 2)))
    assert np.array_equal(new_constant(1, 3, 1.0), [[1.0, 1.0, 1.0]])
    assert np.array_equal(new_constant(3, 1, -0.5), [[-0.5], [-0.5], [-0.5]])
    assert new_constant(2, 3, 1.0).dtype == np.float64


@pytest.mark.parametrize("h,w,value", [(0, 3, 1.0), (2, -1, 1.0), (2, 2, math.nan),
                                       (2, 2, math.inf)])
def test_new_constant_rejects(h, w, value):
    with pytest.raises(ValueError):
        new_constant(h, w, value)


def test_zero_fields():
    assert zeros_vector(3, 4).shape == (2, 3, 4)
    assert zeros_hessian(3, 4).shape == (4, 3, 4)


def test_arithmetic_examples():
    assert dot(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0
    assert norm2(np.zeros((3, 3))) == 0.0
    np.testing.assert_array_equal(axpy(2.0, np.array([1.0, 0.0]), np.array([0.0, 1.0])),
                                  [2.0, 1.0])
    np.testing.assert_array_equal(map2(np.maximum, np.array([1.0, 5.0]), np.array([3.0, 2.0])),
                                  [3.0, 5.0])


def test_shape_checks():
    with pytest.raises(ValueError):
        dot(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        axpy(1.0, np.zeros((2, 3, 3)), np.zeros((4, 3, 3)))
    with pytest.raises(ValueError):
        check_same_shape(np.zeros(3), np.zeros(4))


def test_finite_checks():
    with pytest.raises(FloatingPointError):
        check_finite(np.array([1.0, np.nan]))
    with pytest.raises(FloatingPointError):
        as_field([[0.0, np.inf]])
    assert as_field([[1, 2]]).dtype == np.float64


@settings(max_examples=50, deadline=None)
@given(h=st.integers(1, 16), w=st.integers(1, 16), seed=st.integers(0, 2**32 - 1))
def test_dot_symmetric_and_parallelogram_bound(h, w, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, h, w))
    assert abs(dot(a, b) - dot(b, a)) <= 1e-12 * max(1.0, abs(dot(a, b)))
    assert norm2(a + b) <= 2 * norm2(a) + 2 * norm2(b) + 1e-9


@settings(max_examples=30, deadline=None)
@given(h=st.integers(1, 9), w=st.integers(1, 9), seed=st.integers(0, 2**32 - 1))
def test_fft_roundtrip(h, w, seed):
    a = np.random.default_rng(seed).standard_normal((h, w))
    np.testing.assert_allclose(inverse(forward(a)), a, atol=1e-12)
