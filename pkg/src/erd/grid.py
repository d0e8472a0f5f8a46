"""Dense grid containers and elementwise arithmetic.

Fields are plain float64 numpy arrays in row-major ``(row, col)`` order with
the origin at the top-left pixel:

* scalar field  -- shape ``(H, W)``
* vector field  -- shape ``(2, H, W)``, planes ``(dx, dy)``
* Hessian field -- shape ``(4, H, W)``, planes ``(dxx, dxy, dyx, dyy)``

Spectra are full-size complex arrays with the layout of :func:`numpy.fft.fft2`
(unnormalized forward transform, ``1/N`` inverse).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    "new_constant", "zeros_vector", "zeros_hessian", "as_field",
    "check_same_shape", "check_finite", "map2", "axpy", "dot", "norm2",
    "forward", "inverse", "VECTOR_PLANES", "HESSIAN_PLANES",
]

VECTOR_PLANES = ("dx", "dy")
HESSIAN_PLANES = ("dxx", "dxy", "dyx", "dyy")


def new_constant(height: int, width: int, value: float) -> np.ndarray:
    """Return an ``(height, width)`` scalar field filled with `value`."""
    if int(height) < 1 or int(width) < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    if not np.isfinite(value):
        raise ValueError(f"fill value must be finite, got {value!r}")
    return np.full((int(height), int(width)), float(value), dtype=np.float64)


def zeros_vector(height: int, width: int) -> np.ndarray:
    return np.zeros((2, height, width))


def zeros_hessian(height: int, width: int) -> np.ndarray:
    return np.zeros((4, height, width))


def as_field(a) -> np.ndarray:
    """Coerce `a` to a contiguous float64 array, rejecting non-finite values."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    check_finite(arr)
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def check_finite(a: np.ndarray, what: str = "field") -> None:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{what} contains NaN or Inf")


def map2(fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
         a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Combine two equally shaped fields elementwise with `fn`."""
    check_same_shape(a, b)
    return np.asarray(fn(a, b), dtype=np.float64)


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``alpha * x + y``."""
    check_same_shape(x, y)
    return alpha * x + y


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product summed over every plane and pixel."""
    check_same_shape(a, b)
    return float(np.vdot(np.ravel(a), np.ravel(b)))


def norm2(a: np.ndarray) -> float:
    """Squared Euclidean norm, ``dot(a, a)``."""
    flat = np.ravel(a)
    return float(np.dot(flat, flat))


def forward(a: np.ndarray) -> np.ndarray:
    """Unnormalized 2-D DFT over the last two axes."""
    return np.fft.fft2(a)


def inverse(s: np.ndarray) -> np.ndarray:
    """Inverse of :func:`forward`; the imaginary residue is discarded."""
    return np.fft.ifft2(s).real
