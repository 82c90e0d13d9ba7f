"""Kernel dispatch: compiled core when importable, numpy fallback otherwise.

Set ``STRATCAL_PURE_PYTHON=1`` before import to force the fallback.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("STRATCAL_PURE_PYTHON"):
    try:
        from . import _core
    except ImportError:  # extension not built
        pass
    else:
        _impl = _core
        BACKEND = "cython"


def available_backends():
    names = ["python"]
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


def pava(y, w, backend=None):
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return get_backend(backend).pava(y, w)


def binned_moments(u, e, bounds, backend=None):
    u = np.ascontiguousarray(u, dtype=np.float64)
    e = np.ascontiguousarray(e, dtype=np.float64)
    bounds = np.ascontiguousarray(bounds, dtype=np.intp)
    return get_backend(backend).binned_moments(u, e, bounds)
