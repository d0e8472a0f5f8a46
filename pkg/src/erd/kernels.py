"""Backend selection for the pointwise kernels.

The compiled extension ``erd._kernels`` is used when importable; otherwise the
numpy twin ``erd._kernels_py`` is. Set ``ERD_BACKEND=python`` to force the
fallback or ``ERD_BACKEND=compiled`` to make a missing extension an error.
"""

import importlib
import os

from . import _kernels_py

POWER, LOG, RATIONAL = _kernels_py.POWER, _kernels_py.LOG, _kernels_py.RATIONAL


def load_backend(name: str):
    """Return the kernel module for `name` (``"python"`` or ``"compiled"``)."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        return importlib.import_module("erd._kernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.append("compiled")
    return names


def _select():
    wanted = os.environ.get("ERD_BACKEND", "auto").lower()
    if wanted in ("python", "compiled"):
        return wanted, load_backend(wanted)
    try:
        return "compiled", load_backend("compiled")
    except ImportError:
        return "python", _kernels_py


BACKEND, impl = _select()

dphi = impl.dphi
phi_sum = impl.phi_sum
mm_step = impl.mm_step
v_update = impl.v_update
y1_update = impl.y1_update
