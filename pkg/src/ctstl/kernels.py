"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``CTSTL_PURE_PYTHON`` is set to a non-empty value other
than ``0``) the numpy fallback is used.  ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

_force_py = os.environ.get("CTSTL_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"

pivot = _impl.pivot
window_max = _impl.window_max


def window_min(v, lo, hi):
    """``out[i] = min(v[lo[i]:hi[i] + 1])``."""
    import numpy as np

    return -window_max(-np.ascontiguousarray(v, dtype=float), lo, hi)
