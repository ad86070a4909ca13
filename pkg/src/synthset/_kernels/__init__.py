"""Pixel kernels: compiled core with a NumPy fallback, selected at import.

Set SYNTHSET_KERNELS=python to force the fallback (used by the parity tests
and the benchmark). Both implementations are byte-for-byte equivalent; the
compiled one is just faster on the per-pixel loops.
"""

from __future__ import annotations

import os

from . import _fallback

# hash2d_grid has a single (vectorized) implementation; it only feeds small
# regions and is not worth mirroring in C.
hash2d_grid = _fallback.hash2d_grid

_FORCED = os.environ.get("SYNTHSET_KERNELS", "").lower() in {"python", "fallback"}

if not _FORCED:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"
else:
    _impl = _fallback
    BACKEND = "python"

value_noise = _impl.value_noise
resize_bilinear = _impl.resize_bilinear
rotate_bilinear = _impl.rotate_bilinear


def backend_name() -> str:
    """Which kernel implementation was selected at import ("compiled"/"python")."""
    return BACKEND
