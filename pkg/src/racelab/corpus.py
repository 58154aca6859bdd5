"""Synthetic track corpus used for training, held-out evaluation and tests.

``oval`` is built analytically from two straights and two semicircles; the
other layouts are periodic cubic splines through hand-placed control points.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from racelab.track import Track, TrackError, load_track, make_track, resample_closed, write_track_csv

HALF_WIDTH = 1.1

# counter-clockwise control polygons (meters)
_LAYOUTS = {
    # training layout: a tight hairpin at the end of the main straight, a long fast
    # sweeper, a kink and medium corners
    "training": [
        (0, 0), (30, 0), (37, 2), (39, 7), (35, 10), (28, 10), (22, 13), (20, 20),
        (22, 28), (28, 34), (36, 38), (42, 44), (40, 52), (32, 56), (20, 56), (10, 52),
        (4, 44), (-4, 40), (-10, 32), (-12, 20), (-10, 8), (-6, 2),
    ],
    # held-out: long straights joined by a tight S-chicane and fast sweepers
    "chicane": [
        (0, 0), (30, 0), (42, 4), (46, 14), (42, 24), (32, 28), (26, 32),
        (24, 38), (18, 42), (10, 38), (2, 40), (-8, 36), (-12, 26), (-12, 12),
        (-8, 4),
    ],
    # held-out: a tight hairpin at the end of a long straight
    "hairpin": [
        (0, 0), (36, 0), (44, 3), (46, 8), (42, 12), (30, 12), (22, 14),
        (16, 20), (18, 28), (12, 34), (0, 34), (-8, 28), (-12, 18), (-10, 6),
    ],
}

CORPUS = ("oval", "training", "chicane", "hairpin")


def circle_points(radius: float, spacing: float, clockwise: bool = False, center=(0.0, 0.0)):
    n = int(round(2 * np.pi * radius / spacing))
    th = np.arange(n) * (2 * np.pi / n)
    if clockwise:
        th = -th
    return np.column_stack((center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)))


def oval_points(straight: float = 30.0, radius: float = 8.0, spacing: float = 0.25):
    """Stadium shape, counter-clockwise, starting at the middle of the bottom straight."""
    total = 2 * straight + 2 * np.pi * radius
    n = int(round(total / spacing))
    s = np.arange(n) * (total / n)
    half = straight / 2
    arc = np.pi * radius
    pts = np.empty((n, 2))
    for i, si in enumerate(s):
        if si < half:
            pts[i] = (si, -radius)
        elif si < half + arc:
            a = (si - half) / radius - np.pi / 2
            pts[i] = (half + radius * np.cos(a), radius * np.sin(a))
        elif si < half + arc + straight:
            pts[i] = (half - (si - half - arc), radius)
        elif si < half + 2 * arc + straight:
            a = (si - half - arc - straight) / radius + np.pi / 2
            pts[i] = (-half + radius * np.cos(a), radius * np.sin(a))
        else:
            pts[i] = (-half + (si - half - 2 * arc - straight), -radius)
    return pts


def spline_layout(name: str, spacing: float = 0.25) -> np.ndarray:
    ctrl = np.asarray(_LAYOUTS[name], dtype=np.float64)
    seg = np.hypot(*(np.roll(ctrl, -1, axis=0) - ctrl).T)
    t = np.concatenate(([0.0], np.cumsum(seg)))
    spline = CubicSpline(t, np.vstack((ctrl, ctrl[:1])), bc_type="periodic")
    dense = spline(np.linspace(0, t[-1], 20 * len(ctrl), endpoint=False))
    ones = np.ones(len(dense))
    pts, _, _ = resample_closed(dense, ones, ones, spacing)
    return pts


def corpus_track(name: str, spacing: float = 0.25, half_width: float = HALF_WIDTH) -> Track:
    if name == "oval":
        pts = oval_points(spacing=spacing)
    elif name in _LAYOUTS:
        pts = spline_layout(name, spacing)
    else:
        raise KeyError(f"unknown corpus track {name!r}")
    return make_track(pts, half_width, half_width, name)


def annulus_track(radius: float = 20.0, half_width: float = 1.8, spacing: float = 0.25,
                  clockwise: bool = False) -> Track:
    return make_track(circle_points(radius, spacing, clockwise), half_width, half_width,
                      "annulus")


def write_corpus(directory, spacing: float = 0.25) -> dict[str, Path]:
    """Write every corpus centerline as a racetrack CSV; returns name -> path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = {}
    for name in CORPUS:
        tr = corpus_track(name, spacing)
        path = directory / f"{name}.csv"
        write_track_csv(path, tr.xy, tr.centerline.w_left, tr.centerline.w_right)
        out[name] = path
    return out


def resolve_track(spec: str, stepsize: float = 0.25) -> Track:
    """A corpus name or a path to a racetrack CSV."""
    if spec in CORPUS:
        return corpus_track(spec, stepsize)
    if not Path(spec).is_file():
        raise TrackError(f"unknown track {spec!r}: not a corpus name ({', '.join(CORPUS)}) "
                         "or an existing CSV file")
    return load_track(spec, stepsize)
