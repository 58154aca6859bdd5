"""Pure Pursuit steering with a low-pass curvature filter and speed-scheduled gain.

The lookahead distance comes from a pluggable source: a constant, a speed
schedule ``clip(a + b v)``, or a learned policy (see
:class:`racelab.environment.LearnedLookahead`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

L_MIN, L_MAX = 0.35, 4.0


@dataclass(frozen=True)
class PurePursuitConfig:
    wheelbase: float = 0.33
    beta: float = 0.4
    g_min: float = 0.55
    g_max: float = 1.0
    v_min: float = 2.0
    v_max: float = 10.0
    max_steer: float = 0.4189
    l_bounds: tuple = (L_MIN, L_MAX)

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.g_min > self.g_max:
            raise ValueError("g_min must not exceed g_max")
        if self.v_min >= self.v_max:
            raise ValueError("v_min must be below v_max")


def curvature_command(y_target: float, lookahead: float) -> float:
    return 2.0 * y_target / (lookahead * lookahead)


def filter_curvature(gamma: float, gamma_prev: float, beta: float) -> float:
    return (1.0 - beta) * gamma_prev + beta * gamma


def steering_gain(v: float, cfg: PurePursuitConfig) -> float:
    m = (cfg.g_min - cfg.g_max) / (cfg.v_max - cfg.v_min)
    b = cfg.g_max - m * cfg.v_min
    return max(min(m * v + b, cfg.g_max), cfg.g_min)


def nearest_index(xy: np.ndarray, x: float, y: float) -> int:
    d2 = (xy[:, 0] - x) ** 2 + (xy[:, 1] - y) ** 2
    return int(np.argmin(d2))


def find_target(raceline, pose, lookahead: float, start: int | None = None):
    """Target point ``lookahead`` meters from the rear axle, ahead along the raceline.

    Returns ``(x', y', j)`` in the vehicle frame (x' forward, y' left) and the
    index of the waypoint that closes the interpolated segment.
    """
    xy = raceline.xy if not isinstance(raceline, np.ndarray) else raceline
    x, y, th = pose
    n = len(xy)
    i0 = nearest_index(xy, x, y) if start is None else start
    px, py = xy[i0]
    if (px - x) ** 2 + (py - y) ** 2 >= lookahead * lookahead:
        tx, ty, j = px, py, i0
    else:
        j = None
        for k in range(1, n + 1):
            idx = (i0 + k) % n
            qx, qy = xy[idx]
            if (qx - x) ** 2 + (qy - y) ** 2 >= lookahead * lookahead:
                j = idx
                break
        if j is None:  # whole path inside the lookahead circle
            tx, ty, j = px, py, i0
        else:
            ax, ay = xy[j - 1]
            dx, dy = qx - ax, qy - ay
            fx, fy = ax - x, ay - y
            a = dx * dx + dy * dy
            b = 2 * (fx * dx + fy * dy)
            c = fx * fx + fy * fy - lookahead * lookahead
            t = (-b + math.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)
            t = min(max(t, 0.0), 1.0)
            tx, ty = ax + t * dx, ay + t * dy
    dx, dy = tx - x, ty - y
    c, s = math.cos(th), math.sin(th)
    return c * dx + s * dy, -s * dx + c * dy, j


class FixedLookahead:
    def __init__(self, lookahead: float, bounds=(L_MIN, L_MAX)):
        if not bounds[0] <= lookahead <= bounds[1]:
            raise ValueError(f"lookahead {lookahead} outside {bounds}")
        self.lookahead = lookahead

    def reset(self):
        pass

    def __call__(self, state, index: int) -> float:
        return self.lookahead


class ScheduledLookahead:
    """Speed-scheduled baseline ``L = clip(a + b v, L_min, L_max)``."""

    def __init__(self, a: float = 0.30, b: float = 0.25, bounds=(L_MIN, L_MAX)):
        self.a, self.b, self.bounds = a, b, bounds

    def reset(self):
        pass

    def __call__(self, state, index: int) -> float:
        return min(max(self.a + self.b * state.v, self.bounds[0]), self.bounds[1])


class PurePursuit:
    """Stateful tracker: owns the curvature filter memory for one vehicle."""

    def __init__(self, raceline, cfg: PurePursuitConfig | None = None, speed_scale: float = 1.0):
        self.raceline = raceline
        self.cfg = cfg or PurePursuitConfig()
        self.speed_scale = speed_scale
        self._xy = np.ascontiguousarray(raceline.xy)
        self._v = np.asarray(raceline.v_max)
        self.gamma_bar = 0.0
        self.last_target = None

    def reset(self):
        self.gamma_bar = 0.0
        self.last_target = None

    def nearest(self, state) -> int:
        return nearest_index(self._xy, state.x, state.y)

    def steer(self, state, lookahead: float, index: int | None = None):
        """Return ``(delta, v_target)`` and advance the filter state."""
        lo, hi = self.cfg.l_bounds
        if not lo - 1e-12 <= lookahead <= hi + 1e-12:
            raise ValueError(f"lookahead {lookahead} outside {self.cfg.l_bounds}")
        xt, yt, j = find_target(self._xy, state.pose, lookahead, index)
        self.last_target = (xt, yt, j)
        delta, self.gamma_bar = steer(state.v, yt, lookahead, self.cfg, self.gamma_bar)
        return delta, float(self._v[j]) * self.speed_scale


def steer(v: float, y_target: float, lookahead: float, cfg: PurePursuitConfig,
          gamma_prev: float) -> tuple[float, float]:
    """Steering angle from the target's lateral offset; returns ``(delta, gamma_bar)``."""
    gamma = curvature_command(y_target, lookahead)
    gamma_bar = filter_curvature(gamma, gamma_prev, cfg.beta)
    delta = math.atan(cfg.wheelbase * steering_gain(v, cfg) * gamma_bar)
    return min(max(delta, -cfg.max_steer), cfg.max_steer), gamma_bar
