"""Backend selector for the hot kernels.

The compiled Cython extension is preferred when it imported cleanly; the
numpy fallback implements the same predicates and yields identical output.
Force a backend with the IABNET_BACKEND environment variable ("cython" or
"numpy") or at runtime with :func:`use_backend` (used by the benchmark and
the backend-equivalence tests).
"""
import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels  # compiled extension, optional
except ImportError:
    _kernels = None

_BACKENDS = {"numpy": _kernels_py}
if _kernels is not None:
    _BACKENDS["cython"] = _kernels


def available_backends():
    return tuple(sorted(_BACKENDS))


def use_backend(name):
    """Select the kernel backend; returns the previously active name."""
    global _active, backend_name
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    prev = backend_name
    _active = _BACKENDS[name]
    backend_name = name
    return prev


def thin_hardcore(x, y, marks, seg_starts, xi):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    marks = np.ascontiguousarray(marks, dtype=np.float64)
    seg_starts = np.ascontiguousarray(seg_starts, dtype=np.int64)
    return _active.thin_hardcore(x, y, marks, seg_starts, float(xi))


_env = os.environ.get("IABNET_BACKEND")
if _env:
    if _env not in _BACKENDS:
        raise ImportError(f"IABNET_BACKEND={_env!r} requested but only {available_backends()} available")
    backend_name = _env
else:
    backend_name = "cython" if "cython" in _BACKENDS else "numpy"
_active = _BACKENDS[backend_name]
