"""Minimum-curvature racing line and friction-limited speed profile."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from racelab.track import Track, arc_param, curvature_profile, resample_closed

log = logging.getLogger(__name__)

GRAVITY = 9.81


class OptimizationError(RuntimeError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class RacelineProblem:
    track: Track
    d_min: np.ndarray
    d_max: np.ndarray
    margin: float = 0.3

    def __post_init__(self):
        if np.any(self.d_min >= self.d_max):
            raise ValueError("d_min must be strictly below d_max")
        if np.any(self.d_min > 0) or np.any(self.d_max < 0):
            raise ValueError("the centerline (d = 0) must be feasible")

    @classmethod
    def from_track(cls, track: Track, margin: float = 0.3) -> "RacelineProblem":
        cl = track.centerline
        return cls(track, -(cl.w_right - margin), cl.w_left - margin, margin)


@dataclass(frozen=True)
class Raceline:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    kappa: np.ndarray
    v_max: np.ndarray
    _frame: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("s", "x", "y", "kappa", "v_max"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "_frame", arc_param(np.column_stack((self.x, self.y))))

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack((self.x, self.y))

    @property
    def normal(self) -> np.ndarray:
        return self._frame.normal

    @property
    def tangent(self) -> np.ndarray:
        return self._frame.tangent

    @property
    def length(self) -> float:
        return self._frame.length

    def __len__(self) -> int:
        return len(self.s)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# s_m;x_m;y_m;kappa;v_mps\n")
            for row in zip(self.s, self.x, self.y, self.kappa, self.v_max):
                fh.write(";".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "Raceline":
        data = np.loadtxt(path, delimiter=";", comments="#", ndmin=2)
        return cls(*data.T)


def _stencils(p: np.ndarray, h: float):
    nxt = np.roll(p, -1, axis=0)
    prv = np.roll(p, 1, axis=0)
    return (nxt - prv) / (2 * h), (nxt - 2 * p + prv) / (h * h)


def curvature_cost(d, center, normal, h) -> tuple[float, np.ndarray]:
    """Discrete sum of kappa^2 ds along c + d*n and its gradient with respect to d.

    Derivatives use periodic central differences on the uniform centerline grid
    of spacing ``h``; ds is the local arc element |p'| h of the offset path.
    """
    p = center + d[:, None] * normal
    d1, d2 = _stencils(p, h)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    q = d1[:, 0] ** 2 + d1[:, 1] ** 2
    f = cross ** 2 * q ** -2.5
    cost = h * float(f.sum())

    df_dc = 2 * cross * q ** -2.5
    df_dq = -2.5 * cross ** 2 * q ** -3.5
    g_d1 = df_dc[:, None] * np.column_stack((d2[:, 1], -d2[:, 0])) + 2 * df_dq[:, None] * d1
    g_d2 = df_dc[:, None] * np.column_stack((-d1[:, 1], d1[:, 0]))
    g_p = (np.roll(g_d1, 1, axis=0) - np.roll(g_d1, -1, axis=0)) / (2 * h)
    g_p += (np.roll(g_d2, 1, axis=0) - 2 * g_d2 + np.roll(g_d2, -1, axis=0)) / (h * h)
    grad = h * np.einsum("ij,ij->i", g_p, normal)
    return cost, grad


def _pgd(d, center, normal, h, lo, hi, iters, tol, history):
    f, g = curvature_cost(d, center, normal, h)
    if history is not None:
        history.append(f)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise OptimizationError("non-finite objective or gradient", 0)
    step = 1e-3 / max(np.max(np.abs(g)), 1e-12)

    for it in range(1, iters + 1):
        alpha = step
        while True:
            d_new = np.clip(d - alpha * g, lo, hi)
            delta = d_new - d
            f_new, g_new = curvature_cost(d_new, center, normal, h)
            if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
                raise OptimizationError("non-finite objective or gradient", it)
            if f_new <= f + 1e-4 * float(g @ delta):
                break
            alpha *= 0.5
            if alpha * np.max(np.abs(g)) < 1e-16:
                return d
        if not np.any(delta):
            return d
        y = g_new - g
        sy = float(delta @ y)
        step = float(delta @ delta) / sy if sy > 0 else 2.0 * alpha
        rel = (f - f_new) / max(abs(f), 1e-300)
        d, f, g = d_new, f_new, g_new
        if history is not None:
            history.append(f)
        if rel < tol:
            break
    return d


def _window_bounds(lo, hi, k):
    """Per coarse node, the tightest bounds over the fine nodes it stands for."""
    n = len(lo)
    idx = (np.arange(0, n, k)[:, None] + np.arange(-(k // 2), k - k // 2)[None, :]) % n
    return lo[idx].max(axis=1), hi[idx].min(axis=1)


def optimize_min_curvature(problem: RacelineProblem, iters: int = 5000, tol: float = 1e-10,
                           history: list | None = None,
                           coarse_spacing: tuple = (4.0, 2.0, 1.0)) -> np.ndarray:
    """Lateral offsets minimizing the discrete integral of squared curvature.

    Projected gradient descent with Barzilai-Borwein trial steps and Armijo
    backtracking, so accepted steps never increase the objective. Low-frequency
    error modes converge slowly on a fine grid, so the problem is first solved
    on subsampled grids (``coarse_spacing`` in meters) and each solution seeds
    the next level. ``history`` receives the fine-grid objective, starting at
    d = 0, after every accepted iteration.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    track = problem.track
    center, normal = np.asarray(track.xy), np.asarray(track.normal)
    n = track.n_points
    h = track.length / n
    lo, hi = np.asarray(problem.d_min), np.asarray(problem.d_max)

    d_seed = None
    for spacing in coarse_spacing:
        k = int(round(spacing / h))
        if k < 2 or n // k < 16:
            continue
        m = n // k
        sel = np.arange(m) * k
        c_lo, c_hi = _window_bounds(lo, hi, k)
        c_lo, c_hi = c_lo[:m], c_hi[:m]
        start = np.zeros(m) if d_seed is None else d_seed[sel]
        dc = _pgd(np.clip(start, c_lo, c_hi), center[sel], normal[sel], h * k,
                  c_lo, c_hi, iters, tol, None)
        # smooth periodic interpolation; piecewise-linear offsets would put
        # curvature spikes at every coarse node
        spline = CubicSpline(np.append(sel, n), np.append(dc, dc[0]), bc_type="periodic")
        d_seed = np.clip(spline(np.arange(n)), lo, hi)

    d0 = np.zeros(n)
    f0, _ = curvature_cost(d0, center, normal, h)
    if history is not None:
        history.append(f0)
    if d_seed is not None:
        d_seed = np.clip(d_seed, lo, hi)
        if curvature_cost(d_seed, center, normal, h)[0] > f0:
            d_seed = d0
    else:
        d_seed = d0
    sub = [] if history is not None else None
    d = _pgd(d_seed, center, normal, h, lo, hi, iters, tol, sub)
    if history is not None:
        history.extend(sub)
    return d


def velocity_profile(kappa, ds, mu: float = 0.8, g: float = GRAVITY, eps: float = 1e-3,
                     a_long_max: float = 6.0, v_cap: float = 12.0, smooth: bool = True,
                     max_sweeps: int = 10, tol: float = 1e-6) -> np.ndarray:
    """Speed limits on a closed path.

    ``ds[i]`` is the distance from waypoint i to i+1 (scalar broadcasts). The
    pointwise limit is min(v_cap, sqrt(mu g / (|kappa| + eps))); with ``smooth``
    forward (traction) and backward (braking) passes enforce the friction
    circle with longitudinal acceleration taken as (v[i+1]^2 - v[i]^2)/(2 ds[i]).
    """
    kappa = np.abs(np.asarray(kappa, dtype=np.float64))
    n = len(kappa)
    ds = np.broadcast_to(np.asarray(ds, dtype=np.float64), (n,))
    if mu <= 0 or g <= 0 or eps <= 0 or a_long_max <= 0 or v_cap <= 0 or np.any(ds <= 0):
        raise ValueError("velocity_profile inputs must be positive")
    mg = mu * g
    cap = np.minimum(v_cap, np.sqrt(mg / (kappa + eps)))
    if not smooth:
        return cap

    v2 = cap ** 2
    cap2 = v2.copy()
    start = int(np.argmin(cap))
    order = (start + np.arange(n)) % n
    for _ in range(max_sweeps):
        before = v2.copy()
        for i in order:
            j = (i + 1) % n
            lat = v2[i] * kappa[i]
            a_avail = min(a_long_max, np.sqrt(max(0.0, mg * mg - lat * lat)))
            v2[j] = min(v2[j], v2[i] + 2 * a_avail * ds[i])
        for i in order[::-1]:
            j = (i + 1) % n
            w = v2[j]
            c = 1.0 / (4 * ds[i] * ds[i])
            a = kappa[i] ** 2 + c
            disc = a * mg * mg - kappa[i] ** 2 * c * w * w
            u_star = (c * w + np.sqrt(max(disc, 0.0))) / a
            v2[i] = min(v2[i], cap2[i], u_star, w + 2 * a_long_max * ds[i])
        if np.max(np.abs(np.sqrt(v2) - np.sqrt(before))) < tol:
            break
    return np.sqrt(v2)


@dataclass
class RacelineParams:
    margin: float = 0.3
    iters: int = 5000
    tol: float = 1e-10
    stepsize: float = 0.25
    mu: float = 0.8
    g: float = GRAVITY
    eps: float = 1e-3
    a_long_max: float = 6.0
    v_cap: float = 12.0
    smooth: bool = True


def build_raceline(track: Track, params: RacelineParams | None = None) -> Raceline:
    params = params or RacelineParams()
    problem = RacelineProblem.from_track(track, params.margin)
    d = optimize_min_curvature(problem, params.iters, params.tol)
    path = np.asarray(track.xy) + d[:, None] * np.asarray(track.normal)
    ones = np.ones(len(path))
    path, _, _ = resample_closed(path, ones, ones, params.stepsize)
    frame = arc_param(path)
    kappa = curvature_profile(path, closed=True)
    ds = np.hypot(*(np.roll(path, -1, axis=0) - path).T)
    v = velocity_profile(kappa, ds, params.mu, params.g, params.eps, params.a_long_max,
                         params.v_cap, params.smooth)
    return Raceline(frame.s, path[:, 0], path[:, 1], kappa, v)
