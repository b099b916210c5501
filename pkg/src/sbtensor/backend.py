"""Kernel backend selection.

SBTENSOR_BACKEND=numba   require the jitted loops (default when available)
SBTENSOR_BACKEND=numpy   pure-numpy fallback
SBTENSOR_BACKEND=auto    numba if importable, else numpy
"""
from __future__ import annotations

import os


def _select():
    choice = os.environ.get("SBTENSOR_BACKEND", "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"SBTENSOR_BACKEND must be auto|numba|numpy, got {choice!r}")
    if choice in ("auto", "numba"):
        try:
            from . import _loops_numba as impl
            return "numba", impl
        except ImportError:
            if choice == "numba":
                raise
    from . import _loops_numpy as impl
    return "numpy", impl


BACKEND_NAME, _impl = _select()

gemm_core = _impl.gemm_core
batched_core = _impl.batched_core
ext_batched_core = _impl.ext_batched_core
blocked_core = _impl.blocked_core


def active_backend() -> str:
    return BACKEND_NAME
