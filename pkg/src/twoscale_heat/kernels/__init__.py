"""Kernel backend selection.

The compiled Cython module is preferred when it imported cleanly; the numpy
implementation is the fallback.  ``TWOSCALE_HEAT_KERNELS=py`` or ``=c``
forces a backend (the benchmark uses this to compare the two).
"""

import os

from . import _pykernels

BACKEND = "py"
_impl = _pykernels

_forced = os.environ.get("TWOSCALE_HEAT_KERNELS", "").strip().lower()
if _forced not in ("py",):
    try:
        from . import _ckernels

        _impl = _ckernels
        BACKEND = "c"
    except ImportError:
        if _forced == "c":
            raise
        _impl = _pykernels
        BACKEND = "py"

tri_geometry = _impl.tri_geometry
local_stiffness = _impl.local_stiffness
element_gradients = _impl.element_gradients
accumulate_weighted = _impl.accumulate_weighted
locate_points = _impl.locate_points

__all__ = [
    "BACKEND",
    "tri_geometry",
    "local_stiffness",
    "element_gradients",
    "accumulate_weighted",
    "locate_points",
]
