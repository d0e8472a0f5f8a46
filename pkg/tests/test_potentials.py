import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.optimize import bisect

from erd.fftops import grad, hess
from erd.potentials import (PotentialSpec, dphi, mm_objective, mm_scalar_iterates,
                            mm_scalar_solve, mm_step, mm_surrogate, mm_update_m, mm_update_n,
                            phi, phi_sum)

POWER = PotentialSpec("power", p=0.5)
SPECS = [PotentialSpec("power", p=0.2), POWER, PotentialSpec("power", p=0.9),
         PotentialSpec("log", alpha=2.0), PotentialSpec("rational", beta_pot=3.0)]
spec_st = st.sampled_from(SPECS)


def smoothed_objective(f, lam, spec, u):
    return 0.5 * lam * (f - u) ** 2 + phi(spec, abs(u) + spec.epsilon)


def fixed_point_oracle(f, lam, spec, lo, hi):
    """Root of ``u - f + dphi(u)/lam`` on a bracket where dphi is continuous."""
    return bisect(lambda u: u - f + dphi(spec, u) / lam, lo, hi, xtol=1e-15, maxiter=500)


# ---------------------------------------------------------------- parameter validation

@pytest.mark.parametrize("kwargs", [dict(family="cubic"), dict(p=1.0), dict(p=0.0),
                                    dict(family="log", alpha=0.0),
                                    dict(family="rational", beta_pot=-1.0),
                                    dict(epsilon=0.0)])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        PotentialSpec(**kwargs)


def test_only_family_parameter_is_checked():
    # p is irrelevant for the log family
    assert PotentialSpec("log", p=5.0, alpha=1.0).param == 1.0


# ---------------------------------------------------------------- phi and dphi

def test_phi_examples():
    assert phi(POWER, 4.0) == 2.0
    assert phi(PotentialSpec("log", alpha=1.0), 0.0) == 0.0
    assert phi(PotentialSpec("rational", beta_pot=2.0), 1.0) == pytest.approx(2 / 3, abs=1e-15)
    assert phi(POWER, -4.0) == 2.0


def test_dphi_examples():
    assert dphi(POWER, 0.5) == pytest.approx(0.5 * 0.50001 ** -0.5, rel=1e-14)
    assert dphi(POWER, 0.5) == pytest.approx(0.7071, abs=1e-4)
    assert dphi(PotentialSpec("log", alpha=2.0), 1.0) == pytest.approx(2 / (1 + 2 * 1.00001),
                                                                       rel=1e-14)


def test_dphi_zero_takes_positive_branch():
    for spec in SPECS:
        assert dphi(spec, 0.0) > 0
        assert dphi(spec, 0.0) == spec.slope_at_zero()
    assert dphi(POWER, 0.0) == pytest.approx(0.5 * 1e-5 ** -0.5)


@settings(max_examples=80, deadline=None)
@given(spec=spec_st, t=st.floats(1e-6, 50.0))
def test_dphi_odd(spec, t):
    assert dphi(spec, -t) == -dphi(spec, t)


@settings(max_examples=80, deadline=None)
@given(spec=spec_st, t=st.floats(0.05, 20.0), sign=st.sampled_from([-1.0, 1.0]))
def test_dphi_is_derivative_of_shifted_potential(spec, t, sign):
    # d/dt phi(|t| + eps) by central differences, away from the kink
    h = 1e-6 * max(1.0, t)
    x = sign * t
    fd = (phi(spec, abs(x + h) + spec.epsilon) - phi(spec, abs(x - h) + spec.epsilon)) / (2 * h)
    assert dphi(spec, x) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_phi_sum_matches_elementwise():
    t = np.random.default_rng(0).standard_normal((4, 5, 6))
    for spec in SPECS:
        assert phi_sum(spec, t) == pytest.approx(float(np.sum(phi(spec, t))), rel=1e-12)


# ---------------------------------------------------------------- MM updates

def test_mm_update_m_without_weight_is_projection():
    rng = np.random.default_rng(1)
    i_next = rng.standard_normal((5, 6))
    y2 = rng.standard_normal((4, 5, 6))
    m_prev = rng.standard_normal((4, 5, 6))
    np.testing.assert_allclose(mm_update_m(i_next, y2, m_prev, 0.0, 3.0, POWER),
                               hess(i_next) - y2 / 3.0, rtol=0, atol=1e-15)


def test_mm_step_scalar_example():
    out = mm_step(np.array([1.0]), np.array([0.0]), np.array([0.5]), 1.0, 2.0, POWER)
    assert out[0] == pytest.approx(1.0 - 0.5 * 0.50001 ** -0.5 / 2.0, rel=1e-14)
    assert out[0] == pytest.approx(0.6464, abs=1e-4)


def test_mm_update_from_zero_state():
    z = np.zeros((3, 4))
    want = -(2.0 / 5.0) * 0.5 * 1e-5 ** -0.5
    m = mm_update_m(z, np.zeros((4, 3, 4)), np.zeros((4, 3, 4)), 2.0, 5.0, POWER)
    n = mm_update_n(z, np.zeros((2, 3, 4)), np.zeros((2, 3, 4)), 2.0, 5.0, POWER)
    np.testing.assert_allclose(m, want, rtol=1e-14)
    np.testing.assert_allclose(n, want, rtol=1e-14)


def test_mm_update_n_examples():
    rng = np.random.default_rng(2)
    r = rng.standard_normal((4, 4))
    y3 = rng.standard_normal((2, 4, 4))
    n_prev = rng.standard_normal((2, 4, 4))
    np.testing.assert_allclose(mm_update_n(r, y3, n_prev, 0.0, 4.0, POWER),
                               grad(r) - y3 / 4.0, atol=1e-15)
    for spec in SPECS:
        a = mm_update_n(r, y3, n_prev, 1.3, 4.0, spec)
        b = mm_update_n(-r, -y3, -n_prev, 1.3, 4.0, spec)
        np.testing.assert_allclose(b, -a, atol=1e-14)


def test_mm_step_argument_checks():
    z = np.zeros(3)
    with pytest.raises(ValueError):
        mm_step(z, z, z, 1.0, 0.0, POWER)
    with pytest.raises(ValueError):
        mm_step(z, z, z, -1.0, 1.0, POWER)


# ---------------------------------------------------------------- surrogate

@settings(max_examples=80, deadline=None)
@given(spec=spec_st, f=st.floats(-3, 3), lam=st.floats(0.1, 100), v=st.floats(-5, 5))
def test_surrogate_tangency(spec, f, lam, v):
    assert mm_surrogate(f, lam, spec, v, v, smoothed=False) == pytest.approx(
        mm_objective(f, lam, spec, v), rel=1e-12, abs=1e-12)
    assert mm_surrogate(f, lam, spec, v, v) == pytest.approx(
        smoothed_objective(f, lam, spec, v), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(spec=spec_st, f=st.floats(-2, 2), lam=st.floats(0.1, 50),
       v=st.floats(-2, 2), u=st.floats(-2, 2))
def test_surrogate_majorizes_on_the_same_side(spec, f, lam, v, u):
    # concavity of s -> phi(s + eps) on s >= 0 makes the tangent an upper
    # bound wherever u and v share a sign
    assume(u * v > 0 or (v == 0 and u >= 0))
    upper = mm_surrogate(f, lam, spec, v, u)
    assert upper >= smoothed_objective(f, lam, spec, u) - 1e-12 * (1 + abs(upper))


def test_linearization_is_not_a_majorizer_across_zero():
    # the odd extension of the tangent undercuts the even potential
    v, u = 0.5, -0.5
    assert mm_surrogate(0.0, 1.0, POWER, v, u) < smoothed_objective(0.0, 1.0, POWER, u)


@settings(max_examples=150, deadline=None)
@given(spec=spec_st, f=st.floats(-3, 3), lam=st.floats(0.5, 50), v=st.floats(-3, 3))
def test_mm_step_minimizes_surrogate(spec, f, lam, v):
    u_next = f - dphi(spec, v) / lam
    best = mm_surrogate(f, lam, spec, v, u_next)
    for du in (-1e-3, 1e-3, -0.5, 0.5):
        assert best <= mm_surrogate(f, lam, spec, v, u_next + du) + 1e-12


# ---------------------------------------------------------------- scalar solver

def test_scalar_solve_large_lambda():
    assert mm_scalar_solve(3.0, 1e9, POWER, 50) == pytest.approx(3.0, abs=1e-6)


def test_scalar_iterates_zero_data_stay_in_band():
    lam = 10.0
    it = mm_scalar_iterates(0.0, lam, POWER, 100)
    band = POWER.slope_at_zero() / lam
    assert np.all(np.abs(it) <= band + 1e-15)
    # the iterates keep flipping sign: zero is never reached
    assert np.all(np.sign(it[1:-1]) == -np.sign(it[2:]))
    # zero is the global minimizer, so no iterate can undercut it
    assert np.all(mm_objective(0.0, lam, POWER, it[1:]) > mm_objective(0.0, lam, POWER, 0.0))


@pytest.mark.parametrize("f,lo,hi", [(1.0, 0.5, 1.0), (3.0, 2.5, 3.0)])
def test_scalar_solve_hits_bisection_fixed_point(f, lo, hi):
    lam = 10.0
    u = mm_scalar_solve(f, lam, POWER, 200)
    assert abs(u - (f - dphi(POWER, u) / lam)) <= 1e-6
    assert u == pytest.approx(fixed_point_oracle(f, lam, POWER, lo, hi), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(spec=spec_st, f=st.floats(0.5, 3.0), lam=st.floats(5.0, 50.0))
def test_scalar_descent_on_positive_branch(spec, f, lam):
    # while iterates stay positive the smoothed objective never increases
    it = mm_scalar_iterates(f, lam, spec, 40)
    assume(np.all(it > 0))
    obj = [smoothed_objective(f, lam, spec, u) for u in it]
    assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(obj, obj[1:]))


def test_scalar_solve_argument_checks():
    with pytest.raises(ValueError):
        mm_scalar_solve(1.0, 0.0, POWER, 10)
    with pytest.raises(ValueError):
        mm_scalar_solve(1.0, 1.0, POWER, 0)


def test_no_fixed_point_for_small_data():
    # u + dphi(u)/lam has a positive minimum above 0.2 for p = 0.5, lam = 10,
    # so the map u -> f - dphi(u)/lam has no fixed point at f = 0.2
    lam = 10.0
    grid = np.linspace(1e-6, 2.0, 200001)
    g = grid + dphi(POWER, grid) / lam
    assert g.min() > 0.2
    assert math.isclose(g.min(), 0.2565, abs_tol=5e-4)
