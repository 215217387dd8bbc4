"""Backend selection for the hot kernels.

The compiled Cython extension is preferred; the NumPy reference takes over
when the extension is missing or ``MIMOLOC_PURE_PYTHON=1`` is set.  Both
expose the same three functions with identical semantics.
"""

import os

from mimoloc._kernels import _ref

if os.environ.get("MIMOLOC_PURE_PYTHON") == "1":
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from mimoloc._kernels import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

path_coefficients = _impl.path_coefficients
trace_objective = _impl.trace_objective
gdop_raster = _impl.gdop_raster


def active_backend():
    """Name of the kernel backend in use: "compiled" or "python"."""
    return BACKEND


__all__ = [
    "BACKEND",
    "active_backend",
    "gdop_raster",
    "path_coefficients",
    "trace_objective",
]
