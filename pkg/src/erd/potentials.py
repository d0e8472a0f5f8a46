"""Nonconvex potentials and their majorize-minimization updates.

Three concave, even potentials are supported::

    power     phi(t) = |t|**p                  0 < p < 1
    log       phi(t) = log(1 + alpha |t|)       alpha > 0
    rational  phi(t) = b |t| / (1 + b |t|)      b > 0

The MM linearization replaces the (possibly singular) derivative at ``t`` by
``sign(t) * phi'(|t| + eps)``, with ``t = 0`` taking the positive branch.
Vector and Hessian fields are treated componentwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .fftops import grad, hess

__all__ = [
    "PotentialSpec", "phi", "dphi", "phi_sum", "mm_step", "mm_update_m",
    "mm_update_n", "mm_objective", "mm_surrogate", "mm_scalar_iterates",
    "mm_scalar_solve",
]

_FAMILY_CODES = {"power": kernels.POWER, "log": kernels.LOG,
                 "rational": kernels.RATIONAL}


@dataclass(frozen=True)
class PotentialSpec:
    """Potential family and its shape parameter.

    Only the parameter belonging to `family` is read: `p` for ``power``,
    `alpha` for ``log``, `beta_pot` for ``rational``.
    """

    family: str = "power"
    p: float = 0.5
    alpha: float = 1.0
    beta_pot: float = 1.0
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.family not in _FAMILY_CODES:
            raise ValueError(f"unknown potential family {self.family!r}; "
                             f"expected one of {sorted(_FAMILY_CODES)}")
        if self.family == "power" and not 0.0 < self.p < 1.0:
            raise ValueError(f"power potential needs 0 < p < 1, got {self.p}")
        if self.family == "log" and not self.alpha > 0.0:
            raise ValueError(f"log potential needs alpha > 0, got {self.alpha}")
        if self.family == "rational" and not self.beta_pot > 0.0:
            raise ValueError(f"rational potential needs beta_pot > 0, got {self.beta_pot}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def code(self) -> int:
        return _FAMILY_CODES[self.family]

    @property
    def param(self) -> float:
        return {"power": self.p, "log": self.alpha,
                "rational": self.beta_pot}[self.family]

    def slope_at_zero(self) -> float:
        """``dphi(0)``, the largest slope magnitude the linearization produces."""
        return float(dphi(self, 0.0))


def phi(spec: PotentialSpec, t):
    """Evaluate the potential elementwise."""
    s = np.abs(np.asarray(t, dtype=np.float64))
    if spec.family == "power":
        out = s ** spec.p
    elif spec.family == "log":
        out = np.log1p(spec.alpha * s)
    else:
        out = spec.beta_pot * s / (1.0 + spec.beta_pot * s)
    return out if out.ndim else float(out)


def dphi(spec: PotentialSpec, t):
    """Sign-smoothed derivative ``sign(t) * phi'(|t| + eps)``."""
    out = kernels.dphi(np.asarray(t, dtype=np.float64), spec.code,
                       spec.param, spec.epsilon)
    return out if np.ndim(out) else float(out)


def phi_sum(spec: PotentialSpec, t) -> float:
    """Sum of the potential over every entry of `t`."""
    return kernels.phi_sum(np.asarray(t, dtype=np.float64), spec.code, spec.param)


def mm_step(base, y, prev, omega: float, rho: float, spec: PotentialSpec) -> np.ndarray:
    """One linearized MM step: ``base - y/rho - (omega/rho) * dphi(prev)``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return kernels.mm_step(base, y, prev, omega, rho, spec.code, spec.param,
                           spec.epsilon)


def mm_update_m(i_next, y2, m_prev, omega1: float, rho: float,
                spec: PotentialSpec) -> np.ndarray:
    """Hessian-plane splitting update from the freshly solved illumination."""
    return mm_step(hess(i_next), y2, m_prev, omega1, rho, spec)


def mm_update_n(r_next, y3, n_prev, omega2: float, rho: float,
                spec: PotentialSpec) -> np.ndarray:
    """Gradient-plane splitting update from the freshly solved reflectance."""
    return mm_step(grad(r_next), y3, n_prev, omega2, rho, spec)


def mm_objective(f, lam: float, spec: PotentialSpec, u):
    """Pointwise ``lam/2 (f - u)^2 + phi(u)``."""
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * lam * (f - u) ** 2 + phi(spec, u)


def mm_surrogate(f, lam: float, spec: PotentialSpec, v, u, smoothed: bool = True):
    """Tangent surrogate of :func:`mm_objective` built at `v`, evaluated at `u`.

    With ``smoothed`` the potential part is ``phi(|v| + eps)``, the function
    whose exact derivative the linearization uses.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    anchor = phi(spec, np.abs(v) + spec.epsilon) if smoothed else phi(spec, v)
    return 0.5 * lam * (f - u) ** 2 + anchor + dphi(spec, v) * (u - v)


def mm_scalar_iterates(f: float, lam: float, spec: PotentialSpec, iters: int) -> np.ndarray:
    """All iterates ``u_0 = f, u_{k+1} = f - dphi(u_k)/lam`` for ``k < iters``."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    out = np.empty(iters + 1)
    out[0] = u = float(f)
    for k in range(iters):
        u = f - dphi(spec, u) / lam
        out[k + 1] = u
    return out


def mm_scalar_solve(f: float, lam: float, spec: PotentialSpec, iters: int) -> float:
    """Minimize ``lam/2 (f-u)^2 + phi(u)`` by `iters` MM steps from ``u = f``."""
    return float(mm_scalar_iterates(f, lam, spec, iters)[-1])
