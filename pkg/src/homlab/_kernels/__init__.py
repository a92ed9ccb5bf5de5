"""Kernel backend selection.

The compiled Cython extension is preferred; the NumPy implementation in
``pure.py`` is the drop-in fallback.  Set ``HOMLAB_PURE_PYTHON=1`` to force
the fallback (used by the benchmark and the backend-agreement tests).
"""

import os

from . import pure

if os.environ.get("HOMLAB_PURE_PYTHON"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

flux_apply_periodic = _impl.flux_apply_periodic
flux_apply_box = _impl.flux_apply_box
stencil5_apply = _impl.stencil5_apply
ball_fractions = _impl.ball_fractions

__all__ = [
    "BACKEND",
    "ball_fractions",
    "flux_apply_box",
    "flux_apply_periodic",
    "pure",
    "stencil5_apply",
]
