"""Pure NumPy DDA ray traversal; same contract as the compiled ``_dda`` module.

All rays advance one cell crossing per iteration, so the loop count is bounded
by the longest ray (in cells) rather than the number of rays.
"""

import numpy as np


def cast_rays(occ, res, ox, oy, xs, ys, angles, max_range):
    occ = np.asarray(occ, dtype=np.uint8)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    angles = np.asarray(angles, dtype=np.float64)
    h, w = occ.shape
    n = angles.shape[0]

    dx = np.cos(angles)
    dy = np.sin(angles)
    cx = (xs - ox) / res
    cy = (ys - oy) / res
    col = np.floor(cx).astype(np.int64)
    row = np.floor(cy).astype(np.int64)
    max_t = max_range / res

    out = np.full(n, max_range, dtype=np.float64)

    def blocked(r, c):
        inside = (r >= 0) & (c >= 0) & (r < h) & (c < w)
        hit = ~inside
        hit[inside] = occ[r[inside], c[inside]] != 0
        return hit

    start_hit = blocked(row, col)
    out[start_hit] = 0.0

    with np.errstate(divide="ignore", invalid="ignore"):
        step_c = np.sign(dx).astype(np.int64)
        step_r = np.sign(dy).astype(np.int64)
        t_max_x = np.where(dx > 0, (col + 1 - cx) / dx,
                           np.where(dx < 0, (cx - col) / (-dx), np.inf))
        t_max_y = np.where(dy > 0, (row + 1 - cy) / dy,
                           np.where(dy < 0, (cy - row) / (-dy), np.inf))
        t_delta_x = np.where(dx != 0, 1.0 / np.abs(dx), np.inf)
        t_delta_y = np.where(dy != 0, 1.0 / np.abs(dy), np.inf)

    active = np.flatnonzero(~start_hit)
    while active.size:
        tx = t_max_x[active]
        ty = t_max_y[active]
        along_x = tx < ty
        t = np.where(along_x, tx, ty)
        ix = active[along_x]
        iy = active[~along_x]
        t_max_x[ix] += t_delta_x[ix]
        col[ix] += step_c[ix]
        t_max_y[iy] += t_delta_y[iy]
        row[iy] += step_r[iy]

        capped = t >= max_t
        hit = ~capped & blocked(row[active], col[active])
        out[active[hit]] = t[hit] * res
        active = active[~(capped | hit)]
    return out
