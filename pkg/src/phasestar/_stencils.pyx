# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fourth-order finite-difference stencils along one axis.

Hot kernels of the grid propagator.  Arrays are viewed as (pre, n, post)
with the derivative axis in the middle; the same contract is implemented
by the pure-numpy fallback module.
"""

import numpy as np


def fd4_axis(double[:, :, ::1] arr, int order, double spacing, bint periodic,
             double[:, :, ::1] out):
    cdef Py_ssize_t pre = arr.shape[0]
    cdef Py_ssize_t n = arr.shape[1]
    cdef Py_ssize_t post = arr.shape[2]
    cdef Py_ssize_t i, j, k, s
    cdef double c1, c2, c3, c0
    cdef Py_ssize_t jm3, jm2, jm1, jp1, jp2, jp3

    if order == 1:
        c1 = 8.0 / (12.0 * spacing)
        c2 = 1.0 / (12.0 * spacing)
        with nogil:
            for i in range(pre):
                for j in range(n):
                    if periodic:
                        jm2 = (j - 2 + n) % n; jm1 = (j - 1 + n) % n
                        jp1 = (j + 1) % n; jp2 = (j + 2) % n
                        for k in range(post):
                            out[i, j, k] = (
                                c2 * arr[i, jm2, k] - c1 * arr[i, jm1, k]
                                + c1 * arr[i, jp1, k] - c2 * arr[i, jp2, k]
                            )
                    else:
                        for k in range(post):
                            out[i, j, k] = (
                                c2 * (arr[i, j - 2, k] if j >= 2 else 0.0)
                                - c1 * (arr[i, j - 1, k] if j >= 1 else 0.0)
                                + c1 * (arr[i, j + 1, k] if j + 1 < n else 0.0)
                                - c2 * (arr[i, j + 2, k] if j + 2 < n else 0.0)
                            )
    elif order == 2:
        c0 = -30.0 / (12.0 * spacing * spacing)
        c1 = 16.0 / (12.0 * spacing * spacing)
        c2 = -1.0 / (12.0 * spacing * spacing)
        with nogil:
            for i in range(pre):
                for j in range(n):
                    if periodic:
                        jm2 = (j - 2 + n) % n; jm1 = (j - 1 + n) % n
                        jp1 = (j + 1) % n; jp2 = (j + 2) % n
                        for k in range(post):
                            out[i, j, k] = (
                                c2 * (arr[i, jm2, k] + arr[i, jp2, k])
                                + c1 * (arr[i, jm1, k] + arr[i, jp1, k])
                                + c0 * arr[i, j, k]
                            )
                    else:
                        for k in range(post):
                            out[i, j, k] = (
                                c2 * ((arr[i, j - 2, k] if j >= 2 else 0.0)
                                      + (arr[i, j + 2, k] if j + 2 < n else 0.0))
                                + c1 * ((arr[i, j - 1, k] if j >= 1 else 0.0)
                                        + (arr[i, j + 1, k] if j + 1 < n else 0.0))
                                + c0 * arr[i, j, k]
                            )
    elif order == 3:
        c1 = 13.0 / (8.0 * spacing * spacing * spacing)
        c2 = 8.0 / (8.0 * spacing * spacing * spacing)
        c3 = 1.0 / (8.0 * spacing * spacing * spacing)
        with nogil:
            for i in range(pre):
                for j in range(n):
                    if periodic:
                        jm3 = (j - 3 + n) % n; jm2 = (j - 2 + n) % n; jm1 = (j - 1 + n) % n
                        jp1 = (j + 1) % n; jp2 = (j + 2) % n; jp3 = (j + 3) % n
                        for k in range(post):
                            out[i, j, k] = (
                                c3 * arr[i, jm3, k] - c2 * arr[i, jm2, k]
                                + c1 * arr[i, jm1, k] - c1 * arr[i, jp1, k]
                                + c2 * arr[i, jp2, k] - c3 * arr[i, jp3, k]
                            )
                    else:
                        for k in range(post):
                            out[i, j, k] = (
                                c3 * (arr[i, j - 3, k] if j >= 3 else 0.0)
                                - c2 * (arr[i, j - 2, k] if j >= 2 else 0.0)
                                + c1 * (arr[i, j - 1, k] if j >= 1 else 0.0)
                                - c1 * (arr[i, j + 1, k] if j + 1 < n else 0.0)
                                + c2 * (arr[i, j + 2, k] if j + 2 < n else 0.0)
                                - c3 * (arr[i, j + 3, k] if j + 3 < n else 0.0)
                            )
    else:
        raise ValueError("fd4 stencils are provided for orders 1..3")
    return np.asarray(out)
