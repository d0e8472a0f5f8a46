import importlib
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erd import kernels

ref = kernels.load_backend("python")
BACKENDS = kernels.available_backends()
FAMILIES = [(kernels.POWER, 0.5), (kernels.POWER, 0.2), (kernels.POWER, 0.9),
            (kernels.LOG, 2.0), (kernels.RATIONAL, 3.0)]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.load_backend(request.param)


def test_compiled_backend_is_built():
    # the compiled core is optional at install time; report clearly if absent
    if "compiled" not in BACKENDS:
        pytest.skip("compiled extension not built; only the numpy fallback is exercised")
    assert kernels.load_backend("compiled").__name__ == "erd._kernels"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


def test_env_override(monkeypatch):
    monkeypatch.setenv("ERD_BACKEND", "python")
    name, mod = kernels._select()
    assert name == "python" and mod is ref


@pytest.mark.parametrize("family,param", FAMILIES)
def test_pointwise_kernels_agree(backend, family, param):
    rng = np.random.default_rng(family * 10 + int(param * 10))
    t = rng.standard_normal((3, 7, 5))
    t.flat[:4] = [0.0, -0.0, 1e-12, -1e-12]
    np.testing.assert_allclose(backend.dphi(t, family, param, 1e-5),
                               ref.dphi(t, family, param, 1e-5), rtol=1e-13)
    assert backend.phi_sum(t, family, param) == pytest.approx(
        ref.phi_sum(t, family, param), rel=1e-12)
    y, prev = rng.standard_normal((2, 3, 7, 5))
    np.testing.assert_allclose(backend.mm_step(t, y, prev, 0.7, 13.0, family, param, 1e-5),
                               ref.mm_step(t, y, prev, 0.7, 13.0, family, param, 1e-5),
                               rtol=1e-13, atol=1e-15)


def test_scalar_dphi(backend):
    out = backend.dphi(np.float64(0.25), kernels.POWER, 0.5, 1e-5)
    assert np.ndim(out) == 0
    assert float(out) == pytest.approx(0.5 / math.sqrt(0.25 + 1e-5), rel=1e-14)


def test_v_and_y1_updates_agree(backend):
    rng = np.random.default_rng(5)
    i, r, u, y1 = rng.standard_normal((4, 6, 6))
    v = rng.uniform(-12, 3, size=(6, 6))  # crosses both clamp bounds
    lo, hi = math.log(1e-4), math.log(4.0)
    np.testing.assert_allclose(backend.v_update(i, r, v, u, y1, 50.0, 1.0, 100.0, lo, hi),
                               ref.v_update(i, r, v, u, y1, 50.0, 1.0, 100.0, lo, hi),
                               rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(backend.y1_update(y1, u, v, 100.0, lo, hi),
                               ref.y1_update(y1, u, v, 100.0, lo, hi), rtol=1e-13, atol=1e-13)


def test_v_update_fixed_point(backend):
    rng = np.random.default_rng(6)
    i, r = rng.uniform(-0.5, 0.3, size=(2, 5, 5))
    v = i + r
    out = backend.v_update(i, r, v, np.exp(v), np.zeros_like(v), 3.0, 0.5, 7.0,
                           math.log(1e-4), math.log(4.0))
    np.testing.assert_allclose(out, v, atol=1e-14)


def test_shape_mismatch(backend):
    a, b = np.zeros((3, 3)), np.zeros((3, 4))
    with pytest.raises(ValueError):
        backend.mm_step(a, b, a, 1.0, 1.0, kernels.POWER, 0.5, 1e-5)
    with pytest.raises(ValueError):
        backend.v_update(a, a, a, b, a, 2.0, 1.0, 1.0, -9.0, 1.0)


def test_unknown_family(backend):
    with pytest.raises(ValueError):
        backend.dphi(np.zeros(3), 7, 0.5, 1e-5)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, 2**32 - 1),
       fam=st.sampled_from(FAMILIES))
def test_backends_agree_on_random_sizes(n, seed, fam):
    t = np.random.default_rng(seed).standard_normal(n) * 10
    for name in BACKENDS:
        mod = kernels.load_backend(name)
        np.testing.assert_allclose(mod.dphi(t, *fam, 1e-5), ref.dphi(t, *fam, 1e-5),
                                   rtol=1e-13)


def test_module_reload_picks_fallback(monkeypatch):
    monkeypatch.setenv("ERD_BACKEND", "python")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("ERD_BACKEND")
        importlib.reload(kernels)
