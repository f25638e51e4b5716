"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``RSDCM_BACKEND=python``
to force the NumPy fallback. ``BACKEND`` names the active choice.
"""
import os

import numpy as np

from . import _pykernels

_requested = os.environ.get("RSDCM_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pykernels
        BACKEND = "python"

balloon_rk4 = _impl.balloon_rk4


def linear_recursion(F, u, x0, stride):
    """x[j+1] = F x[j] + u[j]; returns (every ``stride``-th state, final state)."""
    as_c = lambda a: np.ascontiguousarray(a, dtype=float)
    return _impl.linear_recursion(as_c(F), as_c(u), as_c(x0), int(stride))


def available_backends():
    """Names of the backends that can be imported in this environment."""
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Module implementing the kernels for backend ``name``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
