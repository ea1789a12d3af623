"""Kernel backend selection.

The compiled extension is used when it imports and ``CONEGEO_PURE_PYTHON``
is unset or ``0``; otherwise the pure-Python versions are used.
``BACKEND`` names the active implementation.
"""
import os

from . import _fallback

_force_python = os.environ.get("CONEGEO_PURE_PYTHON", "0") not in ("", "0")

try:
    if _force_python:
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

cone_segments = _impl.cone_segments
conformal_assemble = _impl.conformal_assemble
dijkstra_csr = _impl.dijkstra_csr

__all__ = ["BACKEND", "cone_segments", "conformal_assemble", "dijkstra_csr"]
