"""Track geometry: centerlines, arc-length frames, occupancy grids and raycasting.

Lateral offsets are positive to the left of the direction of travel. All
containers are frozen dataclasses over read-only arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree
from shapely.geometry import LinearRing

from racelab import _kernels

REQUIRED_COLUMNS = ("x_m", "y_m", "w_tr_right_m", "w_tr_left_m")
MIN_POINTS = 16


class TrackError(ValueError):
    """Raised when a centerline violates an ingestion constraint."""


class GeometryError(ValueError):
    """Raised on degenerate path geometry (coincident samples)."""


class LocalizationInputError(ValueError):
    """Raised when a query pose lies inside an occupied cell."""


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Centerline:
    points: np.ndarray
    w_left: np.ndarray
    w_right: np.ndarray
    closed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        object.__setattr__(self, "w_left", _frozen(self.w_left))
        object.__setattr__(self, "w_right", _frozen(self.w_right))


@dataclass(frozen=True)
class ArcParam:
    s: np.ndarray
    length: float
    tangent: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class Track:
    centerline: Centerline
    arc: ArcParam
    name: str = ""

    @property
    def xy(self) -> np.ndarray:
        return self.centerline.points

    @property
    def s(self) -> np.ndarray:
        return self.arc.s

    @property
    def normal(self) -> np.ndarray:
        return self.arc.normal

    @property
    def length(self) -> float:
        return self.arc.length

    @property
    def n_points(self) -> int:
        return len(self.centerline.points)

    def left_boundary(self) -> np.ndarray:
        return self.xy + self.centerline.w_left[:, None] * self.normal

    def right_boundary(self) -> np.ndarray:
        return self.xy - self.centerline.w_right[:, None] * self.normal


def _segment_lengths(points: np.ndarray, closed: bool = True) -> np.ndarray:
    nxt = np.roll(points, -1, axis=0) if closed else points[1:]
    cur = points if closed else points[:-1]
    return np.hypot(*(nxt - cur).T)


def arc_param(points: np.ndarray) -> ArcParam:
    """Arc-length frame of a closed polyline; tangents by periodic central differences."""
    points = np.asarray(points, dtype=np.float64)
    seg = _segment_lengths(points)
    if np.any(seg <= 1e-9):
        raise GeometryError("consecutive points coincide")
    s = np.concatenate(([0.0], np.cumsum(seg[:-1])))
    chord = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
    tangent = chord / np.hypot(*chord.T)[:, None]
    normal = np.column_stack((-tangent[:, 1], tangent[:, 0]))
    return ArcParam(_frozen(s), float(s[-1] + seg[-1]), _frozen(tangent), _frozen(normal))


def validate_centerline(points, w_left, w_right) -> None:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise TrackError("points must be an (N, 2) array")
    if len(points) < MIN_POINTS:
        raise TrackError(f"too few points: {len(points)} < {MIN_POINTS}")
    if not np.all(np.isfinite(points)):
        raise TrackError("non-finite coordinates")
    if np.any(_segment_lengths(points) <= 1e-9):
        raise TrackError("consecutive points must be distinct")
    if np.any(np.asarray(w_left) <= 0) or np.any(np.asarray(w_right) <= 0):
        raise TrackError("track widths must be positive")
    if not LinearRing(points).is_simple:
        raise TrackError("centerline is self-intersecting")


def make_track(points, w_left, w_right, name: str = "") -> Track:
    """Validate a closed centerline and attach its arc-length frame."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    w_left = np.broadcast_to(np.asarray(w_left, dtype=np.float64), (n,))
    w_right = np.broadcast_to(np.asarray(w_right, dtype=np.float64), (n,))
    validate_centerline(points, w_left, w_right)
    return Track(Centerline(points, w_left, w_right), arc_param(points), name)


def resample_closed(points, w_left, w_right, stepsize: float):
    """Resample a closed polyline to uniform arc spacing via a periodic cubic spline.

    Input that is already uniformly spaced with the matching point count is
    returned unchanged.
    """
    points = np.asarray(points, dtype=np.float64)
    w_left = np.asarray(w_left, dtype=np.float64)
    w_right = np.asarray(w_right, dtype=np.float64)
    seg = _segment_lengths(points)
    n_in = len(points)
    if np.ptp(seg) <= 1e-9 * seg.mean() and round(seg.sum() / stepsize) == n_in:
        return points.copy(), w_left.copy(), w_right.copy()

    t = np.concatenate(([0.0], np.cumsum(seg)))
    closed_pts = np.vstack((points, points[:1]))
    spline = CubicSpline(t, closed_pts, bc_type="periodic")

    dense_t = np.linspace(0.0, t[-1], 40 * n_in + 1)
    dense = spline(dense_t)
    dense_s = np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(dense, axis=0).T))))
    total = dense_s[-1]

    n_out = max(MIN_POINTS, int(round(total / stepsize)))
    s_new = np.arange(n_out) * (total / n_out)
    t_new = np.interp(s_new, dense_s, dense_t)
    new_pts = spline(t_new)
    wl = np.interp(t_new, t, np.append(w_left, w_left[0]))
    wr = np.interp(t_new, t, np.append(w_right, w_right[0]))
    return new_pts, wl, wr


def read_track_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read the public racetrack CSV layout: ``# x_m,y_m,w_tr_right_m,w_tr_left_m``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TrackError("empty track file")
    header = [h.strip().lstrip("#").strip() for h in rows[0]]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise TrackError(f"missing column: {', '.join(missing)}")
    idx = [header.index(c) for c in REQUIRED_COLUMNS]
    data = []
    for row in rows[1:]:
        if not row or row[0].lstrip().startswith("#"):
            continue
        data.append([float(row[i]) for i in idx])
    if not data:
        raise TrackError(f"too few points: 0 < {MIN_POINTS}")
    arr = np.asarray(data, dtype=np.float64)
    pts, wr, wl = arr[:, :2], arr[:, 2], arr[:, 3]
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts, wr, wl = pts[:-1], wr[:-1], wl[:-1]
    return pts, wl, wr


def write_track_csv(path, points, w_left, w_right) -> None:
    points = np.asarray(points)
    with open(path, "w", newline="") as fh:
        fh.write("# x_m,y_m,w_tr_right_m,w_tr_left_m\n")
        for (x, y), wr, wl in zip(points, np.broadcast_to(w_right, len(points)),
                                  np.broadcast_to(w_left, len(points))):
            fh.write(f"{x:.9f},{y:.9f},{wr:.9f},{wl:.9f}\n")


def load_track(path, stepsize: float = 0.25, name: str | None = None) -> Track:
    if stepsize <= 0:
        raise TrackError("stepsize must be positive")
    pts, wl, wr = read_track_csv(path)
    validate_centerline(pts, wl, wr)
    pts, wl, wr = resample_closed(pts, wl, wr, stepsize)
    return make_track(pts, wl, wr, name if name is not None else Path(path).stem)


def curvature_profile(path, closed: bool = True) -> np.ndarray:
    """Signed curvature (left turns positive) by finite differences on the chord-length grid."""
    p = np.asarray(path, dtype=np.float64)
    if len(p) < 8:
        raise GeometryError("curvature needs at least 8 points")
    if closed:
        h_f = np.hypot(*(np.roll(p, -1, axis=0) - p).T)
        h_b = np.roll(h_f, 1)
        if np.any(h_f < 1e-12):
            raise GeometryError("degenerate segment in path")
        nxt = np.roll(p, -1, axis=0)
        prv = np.roll(p, 1, axis=0)
        denom = (h_f * h_b * (h_f + h_b))[:, None]
        d1 = (h_b[:, None] ** 2 * nxt - h_f[:, None] ** 2 * prv
              + (h_f ** 2 - h_b ** 2)[:, None] * p) / denom
        d2 = 2.0 * (h_b[:, None] * nxt - (h_f + h_b)[:, None] * p
                    + h_f[:, None] * prv) / denom
    else:
        seg = np.hypot(*np.diff(p, axis=0).T)
        if np.any(seg < 1e-12):
            raise GeometryError("degenerate segment in path")
        s = np.concatenate(([0.0], np.cumsum(seg)))
        d1 = np.gradient(p, s, axis=0, edge_order=2)
        d2 = np.gradient(d1, s, axis=0, edge_order=2)
    speed2 = d1[:, 0] ** 2 + d1[:, 1] ** 2
    if np.any(speed2 < 1e-12):
        raise GeometryError("degenerate derivative in path")
    return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed2 ** 1.5


@dataclass(frozen=True)
class OccupancyGrid:
    resolution: float
    origin: tuple
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def to_cell(self, x, y):
        col = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(np.int64)
        row = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(np.int64)
        return row, col

    def occupied(self, x, y):
        row, col = self.to_cell(x, y)
        inside = (row >= 0) & (col >= 0) & (row < self.height) & (col < self.width)
        out = np.ones(np.shape(row), dtype=bool)
        out[inside] = self.cells[row[inside], col[inside]] != 0
        return out if out.ndim else bool(out)

    def export(self, path) -> Path:
        """Write a P5 graymap (free=254, wall=0) plus a plain-text metadata sidecar."""
        path = Path(path).with_suffix(".pgm")
        img = np.where(self.cells[::-1] != 0, 0, 254).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{self.width} {self.height}\n255\n".encode("ascii"))
            fh.write(img.tobytes())
        ox, oy, oyaw = self.origin
        path.with_suffix(".txt").write_text(
            f"image: {path.name}\nresolution: {self.resolution}\n"
            f"origin: [{ox}, {oy}, {oyaw}]\nwidth: {self.width}\nheight: {self.height}\n")
        return path


def _densify(ring: np.ndarray, spacing: float) -> np.ndarray:
    nxt = np.roll(ring, -1, axis=0)
    seg = np.hypot(*(nxt - ring).T)
    counts = np.maximum(1, np.ceil(seg / spacing).astype(int))
    parts = [ring[i] + np.linspace(0.0, 1.0, c, endpoint=False)[:, None] * (nxt[i] - ring[i])
             for i, c in enumerate(counts)]
    return np.vstack(parts)


def rasterize(track: Track, resolution: float = 0.05, margin: float = 1.0) -> OccupancyGrid:
    """Free cells between the boundaries; boundaries and everything outside occupied."""
    if not 0.01 <= resolution <= 0.5:
        raise ValueError("resolution must lie in [0.01, 0.5] m")
    left, right = track.left_boundary(), track.right_boundary()
    both = np.vstack((left, right))
    lo = both.min(axis=0) - margin
    hi = both.max(axis=0) + margin
    width = int(np.ceil((hi[0] - lo[0]) / resolution))
    height = int(np.ceil((hi[1] - lo[1]) / resolution))

    # dense centerline so the nearest sample is always within res/2 along-track
    spacing = resolution / 2
    center = _densify(track.xy, spacing)
    arc = arc_param(center)
    seg = _segment_lengths(track.xy)
    t = np.concatenate(([0.0], np.cumsum(seg)))
    dense_t = np.concatenate(([0.0], np.cumsum(_segment_lengths(center)[:-1])))
    wl = np.interp(dense_t, t, np.append(track.centerline.w_left, track.centerline.w_left[0]))
    wr = np.interp(dense_t, t, np.append(track.centerline.w_right, track.centerline.w_right[0]))

    xs = lo[0] + (np.arange(width) + 0.5) * resolution
    ys = lo[1] + (np.arange(height) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    query = np.column_stack((gx.ravel(), gy.ravel()))
    reach = float(max(wl.max(), wr.max())) + 2 * resolution
    dist, idx = cKDTree(center).query(query, distance_upper_bound=reach)
    near = np.isfinite(dist)
    free = np.zeros(len(query), dtype=bool)
    i = idx[near]
    rel = query[near] - center[i]
    lat = np.einsum("ij,ij->i", rel, arc.normal[i])
    along = np.einsum("ij,ij->i", rel, arc.tangent[i])
    free[near] = (lat < wl[i]) & (lat > -wr[i]) & (np.abs(along) <= spacing)

    occ = ~free.reshape(height, width)
    for ring in (left, right):
        pts = _densify(ring, resolution / 2)
        col = np.floor((pts[:, 0] - lo[0]) / resolution).astype(int)
        row = np.floor((pts[:, 1] - lo[1]) / resolution).astype(int)
        occ[row, col] = True
    return OccupancyGrid(float(resolution), (float(lo[0]), float(lo[1]), 0.0), occ)


def cast(grid: OccupancyGrid, xs, ys, angles, max_range: float) -> np.ndarray:
    """Batch raycast with absolute ray angles; one ray per (x, y, angle) triple."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    return _kernels.cast_rays(grid.cells, grid.resolution, grid.origin[0], grid.origin[1],
                              xs, ys, angles, float(max_range))


def raycast(grid: OccupancyGrid, pose, angles, max_range: float) -> np.ndarray:
    """Ranges from ``pose`` along beam ``angles`` given relative to the pose heading."""
    x, y, psi = pose
    if grid.occupied(x, y):
        raise LocalizationInputError(f"pose ({x:.3f}, {y:.3f}) lies in an occupied cell")
    angles = np.asarray(angles, dtype=np.float64) + psi
    n = angles.shape[0]
    return cast(grid, np.full(n, x), np.full(n, y), angles, max_range)


def project_to_path(path, point) -> tuple[int, float, float]:
    """Nearest waypoint (lowest index on ties), its station and the signed lateral offset."""
    xy = path.xy
    d2 = np.sum((xy - np.asarray(point, dtype=np.float64)) ** 2, axis=1)
    i = int(np.argmin(d2))
    lateral = float(np.dot(np.asarray(point) - xy[i], path.normal[i]))
    return i, float(path.s[i]), lateral
