"""Pure-numpy fallback for the fd4 stencil kernels.

Same (pre, n, post) contract as the compiled extension; selected at import
time by :mod:`phasestar.kernels` when the extension is unavailable or
explicitly disabled.
"""

from __future__ import annotations

import numpy as np

_WEIGHTS = {
    1: ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)),
    2: (
        (-2, -1.0 / 12.0),
        (-1, 16.0 / 12.0),
        (0, -30.0 / 12.0),
        (1, 16.0 / 12.0),
        (2, -1.0 / 12.0),
    ),
    3: (
        (-3, 1.0 / 8.0),
        (-2, -8.0 / 8.0),
        (-1, 13.0 / 8.0),
        (1, -13.0 / 8.0),
        (2, 8.0 / 8.0),
        (3, -1.0 / 8.0),
    ),
}


def fd4_axis(arr: np.ndarray, order: int, spacing: float, periodic: bool,
             out: np.ndarray | None = None) -> np.ndarray:
    if order not in _WEIGHTS:
        raise ValueError("fd4 stencils are provided for orders 1..3")
    n = arr.shape[1]
    scale = spacing ** order
    if out is None:
        out = np.zeros_like(arr)
    else:
        out[...] = 0.0
    if periodic:
        for offset, w in _WEIGHTS[order]:
            out += (w / scale) * np.roll(arr, -offset, axis=1)
    else:
        for offset, w in _WEIGHTS[order]:
            c = w / scale
            if offset == 0:
                out += c * arr
            elif offset > 0:
                out[:, : n - offset] += c * arr[:, offset:]
            else:
                out[:, -offset:] += c * arr[:, :offset]
    return out
