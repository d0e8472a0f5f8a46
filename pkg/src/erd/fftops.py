"""Periodic finite-difference operators and the spectral subproblem solvers.

All operators wrap around the image border. The gradient uses forward
differences, its negative adjoint :func:`div` uses backward differences, and
the Laplacian is ``div(grad(u))``, the 5-point periodic stencil. Under these
conventions every operator is diagonalized by the 2-D DFT, which is what the
three linear solvers below rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import check_same_shape

__all__ = [
    "OperatorSymbols", "symbols_for", "grad", "div", "laplacian", "hess",
    "hess_adj", "solve_u", "solve_i", "solve_r", "hminus_norm_sq",
    "inverse_laplacian", "inverse_laplacian_norm",
]


def _dxp(u):
    return np.roll(u, -1, axis=-1) - u


def _dxm(u):
    return u - np.roll(u, 1, axis=-1)


def _dyp(u):
    return np.roll(u, -1, axis=-2) - u


def _dym(u):
    return u - np.roll(u, 1, axis=-2)


def grad(u: np.ndarray) -> np.ndarray:
    """Forward-difference gradient; returns planes ``(dx, dy)``."""
    return np.stack((_dxp(u), _dyp(u)))


def div(p: np.ndarray) -> np.ndarray:
    """Backward-difference divergence, satisfying ``<grad u, p> = <u, -div p>``."""
    return _dxm(p[0]) + _dym(p[1])


def laplacian(u: np.ndarray) -> np.ndarray:
    """5-point periodic Laplacian, identical to ``div(grad(u))``."""
    return (np.roll(u, -1, axis=-1) + np.roll(u, 1, axis=-1)
            + np.roll(u, -1, axis=-2) + np.roll(u, 1, axis=-2) - 4.0 * u)


def hess(u: np.ndarray) -> np.ndarray:
    """Discrete Hessian with planes ``(dxx, dxy, dyx, dyy)``.

    The pure second differences are backward-of-forward (centred three-point)
    differences; both mixed planes are forward-forward differences.
    """
    ux = _dxp(u)
    uy = _dyp(u)
    return np.stack((_dxm(ux), _dyp(ux), _dxp(uy), _dym(uy)))


def hess_adj(m: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`hess`."""
    # dxx, dyy are self-adjoint; the transpose of a forward difference is
    # minus the backward one, so the signs cancel on the mixed planes.
    return (_dxp(_dxm(m[0])) + _dym(_dxm(m[1]))
            + _dxm(_dym(m[2])) + _dyp(_dym(m[3])))


@dataclass(frozen=True)
class OperatorSymbols:
    """Real Fourier symbols of the self-adjoint operators on an ``H x W`` grid.

    Arrays are full-size in :func:`numpy.fft.fft2` layout.

    Attributes
    ----------
    grad_sym_sq : ndarray
        Symbol of ``grad* grad`` (= ``-laplacian``).
    hess_sym_sq : ndarray
        Symbol of ``hess* hess``.
    lap_sym : ndarray
        Symbol of the periodic Laplacian; zero at DC, negative elsewhere.
    """

    grad_sym_sq: np.ndarray
    hess_sym_sq: np.ndarray
    lap_sym: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.lap_sym.shape

    def half(self, name: str) -> np.ndarray:
        """Slice of a symbol matching the :func:`numpy.fft.rfft2` layout."""
        w = self.shape[1]
        return getattr(self, name)[:, : w // 2 + 1]


@lru_cache(maxsize=16)
def symbols_for(height: int, width: int) -> OperatorSymbols:
    sy = 4.0 * np.sin(np.pi * np.arange(height) / height) ** 2
    sx = 4.0 * np.sin(np.pi * np.arange(width) / width) ** 2
    sy, sx = sy[:, None], sx[None, :]
    # |symbol|^2 of each Hessian plane: dxx, dxy, dyx, dyy
    hess_sq = sx * sx + sx * sy + sy * sx + sy * sy
    grad_sq = sx + sy
    lap = -grad_sq
    for arr in (grad_sq, hess_sq, lap):
        arr.setflags(write=False)
    return OperatorSymbols(grad_sym_sq=grad_sq, hess_sym_sq=hess_sq, lap_sym=lap)


def _spectral_divide(rhs: np.ndarray, denom_half: np.ndarray) -> np.ndarray:
    shape = rhs.shape
    return np.fft.irfft2(np.fft.rfft2(rhs) / denom_half, s=shape)


def solve_u(f, ev, y1, lam: float, rho: float) -> np.ndarray:
    """Solve ``(lam I - rho Lap) u = lam f + rho Lap(-ev + y1/rho)``.

    `ev` is ``exp(v)``. The system matrix is nonsingular at DC, where it
    reduces to ``mean(u) = mean(f)``.
    """
    check_same_shape(f, ev)
    check_same_shape(f, y1)
    sym = symbols_for(*f.shape)
    rhs = lam * f + laplacian(y1 - rho * ev)
    return _spectral_divide(rhs, lam - rho * sym.half("lap_sym"))


def solve_i(v, r, m, y2, beta: float, theta: float, rho: float) -> np.ndarray:
    """Solve ``((beta+theta) I + rho H*H) i = beta (v - r) + H*(rho m + y2)``."""
    check_same_shape(v, r)
    sym = symbols_for(*v.shape)
    rhs = beta * (v - r) + hess_adj(rho * m + y2)
    return _spectral_divide(rhs, beta + theta + rho * sym.half("hess_sym_sq"))


def solve_r(v, i, n, y3, beta: float, rho: float) -> np.ndarray:
    """Solve ``(beta I + rho G*G) r = beta (v - i) + G*(rho n + y3)``."""
    check_same_shape(v, i)
    sym = symbols_for(*v.shape)
    rhs = beta * (v - i) - div(rho * n + y3)
    return _spectral_divide(rhs, beta + rho * sym.half("grad_sym_sq"))


def inverse_laplacian(w: np.ndarray) -> np.ndarray:
    """Zero-mean solution ``z`` of ``Lap z = w - mean(w)``."""
    sym = symbols_for(*w.shape)
    lap = sym.half("lap_sym").copy()
    lap[0, 0] = 1.0
    what = np.fft.rfft2(w)
    what[0, 0] = 0.0
    return np.fft.irfft2(what / lap, s=w.shape)


def hminus_norm_sq(w: np.ndarray) -> float:
    """Squared H^-1 norm ``||grad(Lap^-1 w)||^2``, taken modulo constants."""
    sym = symbols_for(*w.shape)
    neg_lap = -sym.lap_sym.copy()
    neg_lap[0, 0] = np.inf
    what = np.fft.fft2(w)
    return float(np.sum(np.abs(what) ** 2 / neg_lap) / w.size)


def inverse_laplacian_norm(height: int, width: int) -> float:
    """Operator 2-norm of ``Lap^-1`` on the zero-mean subspace."""
    neg = -symbols_for(height, width).lap_sym
    nonzero = neg[neg > 0]
    if nonzero.size == 0:
        return 0.0
    return float(1.0 / nonzero.min())
