"""Kernel backend selection: compiled extension with pure-numpy fallback.

The compiled stencils are used when the extension built; setting the
environment variable ``PHASESTAR_PURE=1`` forces the numpy fallback (used
by the benchmark to compare both).  Results agree to the last ulp in the
periodic case and exactly in the zero-padded case; determinism is
per-backend bitwise.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("PHASESTAR_PURE"):
    from . import _stencils_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _stencils as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _stencils_py as _impl

        BACKEND = "python"


def fd4_derivative(values: np.ndarray, axis: int, order: int, spacing: float,
                   periodic: bool) -> np.ndarray:
    """Fourth-order one-shot stencil derivative along ``axis``."""
    arr = np.ascontiguousarray(np.moveaxis(values, axis, 0), dtype=np.float64)
    n = arr.shape[0]
    post = int(np.prod(arr.shape[1:], dtype=np.int64)) if arr.ndim > 1 else 1
    view = arr.reshape(1, n, post)
    out = np.empty_like(view)
    _impl.fd4_axis(view, order, spacing, periodic, out)
    result = out.reshape(arr.shape)
    return np.moveaxis(result, 0, axis)
