"""Kernel dispatch.

The compiled ``_ckernels`` module is used when it was built; otherwise the
numpy implementations in ``_pykernels`` are used. Setting the environment
variable ``FUNCAR_PURE_PYTHON=1`` forces the fallback.
"""
import os

from funcar import _pykernels

BACKEND = "python"

if os.environ.get("FUNCAR_PURE_PYTHON", "") != "1":
    try:
        from funcar import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels
    else:
        BACKEND = "cython"
else:
    _impl = _pykernels

ar_recursion = _impl.ar_recursion
fourier_design = _impl.fourier_design

__all__ = ["BACKEND", "ar_recursion", "fourier_design"]
