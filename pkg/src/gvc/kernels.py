"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``GVC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from gvc import _pykernels

if os.environ.get("GVC_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from gvc import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

dijkstra_all_pairs = _impl.dijkstra_all_pairs
demean = _impl.demean

__all__ = ["BACKEND", "dijkstra_all_pairs", "demean"]
