# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels; numerically mirrors ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p, sqrt

cnp.import_array()

cdef enum:
    POWER = 0
    LOG = 1
    RATIONAL = 2


cdef inline double _dphi_mag(double s, int family, double param) noexcept nogil:
    cdef double d
    if family == POWER:
        # p = 0.5 is the common case and sqrt is much cheaper than pow
        if param == 0.5:
            return 0.5 / sqrt(s)
        return param * exp((param - 1.0) * log(s))
    elif family == LOG:
        return param / (1.0 + param * s)
    else:
        d = 1.0 + param * s
        return param / (d * d)


cdef inline double _phi_mag(double s, int family, double param) noexcept nogil:
    if family == POWER:
        if s == 0.0:
            return 0.0
        if param == 0.5:
            return sqrt(s)
        return exp(param * log(s))
    elif family == LOG:
        return log1p(param * s)
    else:
        return param * s / (1.0 + param * s)


cdef inline double _dphi(double t, int family, double param, double eps) noexcept nogil:
    cdef double mag = _dphi_mag(fabs(t) + eps, family, param)
    return -mag if t < 0.0 else mag


cdef inline double _clip(double x, double lo, double hi) noexcept nogil:
    return lo if x < lo else (hi if x > hi else x)


def _check_family(int family):
    if family < 0 or family > 2:
        raise ValueError(f"unknown potential family code {family}")


def _flat(a):
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


def dphi(t, int family, double param, double eps):
    _check_family(family)
    shape = np.shape(t)
    arr = np.ascontiguousarray(t, dtype=np.float64)
    out = np.empty_like(arr)
    cdef double[::1] src = arr.reshape(-1)
    cdef double[::1] dst = out.reshape(-1)
    cdef Py_ssize_t k, n = src.shape[0]
    with nogil:
        for k in range(n):
            dst[k] = _dphi(src[k], family, param, eps)
    return out.reshape(shape) if shape else float(out[0])


def phi_sum(t, int family, double param):
    _check_family(family)
    cdef double[::1] src = _flat(t)
    cdef Py_ssize_t k, n = src.shape[0]
    cdef double acc = 0.0
    with nogil:
        for k in range(n):
            acc += _phi_mag(fabs(src[k]), family, param)
    return acc


def mm_step(base, y, prev, double omega, double rho, int family, double param, double eps):
    _check_family(family)
    shape = np.shape(base)
    cdef double[::1] b = _flat(base)
    cdef double[::1] yy = _flat(y)
    cdef double[::1] pv = _flat(prev)
    if yy.shape[0] != b.shape[0] or pv.shape[0] != b.shape[0]:
        raise ValueError("shape mismatch")
    out = np.empty(b.shape[0])
    cdef double[::1] dst = out
    cdef double w = omega / rho
    cdef Py_ssize_t k, n = b.shape[0]
    with nogil:
        for k in range(n):
            dst[k] = b[k] - yy[k] / rho - w * _dphi(pv[k], family, param, eps)
    return out.reshape(shape)


def v_update(i, r, v, u, y1, double beta, double tau, double rho,
             double vmin, double vmax):
    shape = np.shape(v)
    cdef double[::1] ii = _flat(i)
    cdef double[::1] rr = _flat(r)
    cdef double[::1] vv = _flat(v)
    cdef double[::1] uu = _flat(u)
    cdef double[::1] yy = _flat(y1)
    cdef Py_ssize_t k, n = vv.shape[0]
    if ii.shape[0] != n or rr.shape[0] != n or uu.shape[0] != n or yy.shape[0] != n:
        raise ValueError("shape mismatch")
    out = np.empty(n)
    cdef double[::1] dst = out
    cdef double e, denom = beta + tau
    with nogil:
        for k in range(n):
            e = exp(_clip(vv[k], vmin, vmax))
            dst[k] = (beta * (ii[k] + rr[k]) + tau * vv[k]
                      - rho * e * (e - uu[k]) + yy[k] * e) / denom
    return out.reshape(shape)


def y1_update(y1, u, v, double rho, double vmin, double vmax):
    shape = np.shape(v)
    cdef double[::1] yy = _flat(y1)
    cdef double[::1] uu = _flat(u)
    cdef double[::1] vv = _flat(v)
    cdef Py_ssize_t k, n = vv.shape[0]
    if yy.shape[0] != n or uu.shape[0] != n:
        raise ValueError("shape mismatch")
    out = np.empty(n)
    cdef double[::1] dst = out
    with nogil:
        for k in range(n):
            dst[k] = yy[k] + rho * (uu[k] - exp(_clip(vv[k], vmin, vmax)))
    return out.reshape(shape)
