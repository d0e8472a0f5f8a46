"""Pure-numpy implementation of the pointwise solver kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``ERD_BACKEND=python`` is set.
"""

import numpy as np

POWER, LOG, RATIONAL = 0, 1, 2


def _dphi_mag(s, family, param):
    # derivative of the potential at s > 0
    if family == POWER:
        return param * s ** (param - 1.0)
    if family == LOG:
        return param / (1.0 + param * s)
    if family == RATIONAL:
        d = 1.0 + param * s
        return param / (d * d)
    raise ValueError(f"unknown potential family code {family}")


def _phi_mag(s, family, param):
    if family == POWER:
        return s ** param
    if family == LOG:
        return np.log1p(param * s)
    if family == RATIONAL:
        return param * s / (1.0 + param * s)
    raise ValueError(f"unknown potential family code {family}")


def dphi(t, family, param, eps):
    t = np.asarray(t, dtype=np.float64)
    mag = _dphi_mag(np.abs(t) + eps, family, param)
    return np.where(t < 0.0, -mag, mag)


def phi_sum(t, family, param):
    t = np.asarray(t, dtype=np.float64)
    return float(np.sum(_phi_mag(np.abs(t), family, param)))


def mm_step(base, y, prev, omega, rho, family, param, eps):
    return base - y / rho - (omega / rho) * dphi(prev, family, param, eps)


def v_update(i, r, v, u, y1, beta, tau, rho, vmin, vmax):
    e = np.exp(np.clip(v, vmin, vmax))
    return (beta * (i + r) + tau * v - rho * e * (e - u) + y1 * e) / (beta + tau)


def y1_update(y1, u, v, rho, vmin, vmax):
    return y1 + rho * (u - np.exp(np.clip(v, vmin, vmax)))
