"""Selects the compiled propagation kernels, falling back to NumPy.

Setting ``MIURAKDV_PURE=1`` forces the NumPy implementation.
"""
import os

from . import _propagate_py

BACKEND = "python"
if os.environ.get("MIURAKDV_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _propagate as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _propagate_py
else:
    _impl = _propagate_py

transfer_matrices = _impl.transfer_matrices
propagate_state = _impl.propagate_state

__all__ = ["BACKEND", "transfer_matrices", "propagate_state"]
