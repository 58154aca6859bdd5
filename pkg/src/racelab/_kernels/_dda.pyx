# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DDA ray traversal over a boolean occupancy grid."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, floor, INFINITY

cnp.import_array()


cdef inline bint _blocked(const unsigned char[:, ::1] occ, Py_ssize_t row,
                          Py_ssize_t col) noexcept nogil:
    if row < 0 or col < 0 or row >= occ.shape[0] or col >= occ.shape[1]:
        return True
    return occ[row, col] != 0


cdef double _cast_one(const unsigned char[:, ::1] occ, double res, double ox,
                      double oy, double x, double y, double angle,
                      double max_range) noexcept nogil:
    cdef double dx = cos(angle)
    cdef double dy = sin(angle)
    cdef double cx = (x - ox) / res
    cdef double cy = (y - oy) / res
    cdef Py_ssize_t col = <Py_ssize_t>floor(cx)
    cdef Py_ssize_t row = <Py_ssize_t>floor(cy)
    cdef Py_ssize_t step_c, step_r
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y, t
    cdef double max_t = max_range / res

    if _blocked(occ, row, col):
        return 0.0

    if dx > 0.0:
        step_c = 1
        t_max_x = (col + 1 - cx) / dx
        t_delta_x = 1.0 / dx
    elif dx < 0.0:
        step_c = -1
        t_max_x = (cx - col) / (-dx)
        t_delta_x = 1.0 / (-dx)
    else:
        step_c = 0
        t_max_x = INFINITY
        t_delta_x = INFINITY

    if dy > 0.0:
        step_r = 1
        t_max_y = (row + 1 - cy) / dy
        t_delta_y = 1.0 / dy
    elif dy < 0.0:
        step_r = -1
        t_max_y = (cy - row) / (-dy)
        t_delta_y = 1.0 / (-dy)
    else:
        step_r = 0
        t_max_y = INFINITY
        t_delta_y = INFINITY

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            t_max_x = t_max_x + t_delta_x
            col += step_c
        else:
            t = t_max_y
            t_max_y = t_max_y + t_delta_y
            row += step_r
        if t >= max_t:
            return max_range
        if _blocked(occ, row, col):
            return t * res


def cast_rays(const unsigned char[:, ::1] occ, double res, double ox, double oy,
              const double[::1] xs, const double[::1] ys,
              const double[::1] angles, double max_range):
    """Distance to the first occupied cell for each (x, y, angle) ray.

    Rays starting in an occupied or out-of-grid cell return 0.
    """
    cdef Py_ssize_t n = angles.shape[0]
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    with nogil:
        for i in range(n):
            out_v[i] = _cast_one(occ, res, ox, oy, xs[i], ys[i], angles[i],
                                 max_range)
    return out
