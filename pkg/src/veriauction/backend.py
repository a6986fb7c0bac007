"""Kernel backend selection: compiled extension when available, pure
Python otherwise.  VERIAUCTION_FORCE_PY=1 forces the fallback."""

from __future__ import annotations

import os

from . import kernels as _py_kernels

try:
    from . import _kernels as _c_kernels
except ImportError:
    _c_kernels = None


def compiled_available() -> bool:
    return _c_kernels is not None


def get_backend(force_python: bool = False):
    """Module exposing run_cell(m, n, vmax, start, stop)."""
    if force_python or os.environ.get("VERIAUCTION_FORCE_PY"):
        return _py_kernels
    return _c_kernels if _c_kernels is not None else _py_kernels


def backend_name(force_python: bool = False) -> str:
    backend = get_backend(force_python)
    return "compiled" if backend is _c_kernels and _c_kernels is not None else "python"
