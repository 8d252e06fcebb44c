"""Kernel backend selection.

The compiled extension is used when it imports; ``RAWPIPE_PURE=1`` forces
the numpy fallback. ``BACKEND`` names the active choice.
"""
import os

from . import _fallback

if os.environ.get("RAWPIPE_PURE", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
