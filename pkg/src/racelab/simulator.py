"""Kinematic bicycle vehicle on an occupancy grid with a simulated planar LiDAR."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from racelab.track import OccupancyGrid, cast

COLLISION_RANGE = 0.2


class SimulationFault(RuntimeError):
    pass


class ResetError(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]; in-range angles are returned untouched."""
    if -math.pi < a <= math.pi:
        return a
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    theta: float
    v: float

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True)
class ScanParams:
    beams: int = 1080
    fov: float = math.radians(270.0)
    max_range: float = 30.0
    noise_std: float = 0.01

    def angles(self) -> np.ndarray:
        return np.linspace(-self.fov / 2, self.fov / 2, self.beams)


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.33
    max_steer: float = 0.4189
    a_max: float = 9.51
    a_min: float = -9.51
    k_speed: float = 8.0
    max_steer_rate: float | None = None
    mu_tire: float | None = None
    latency_steps: int = 0
    dt: float = 0.01
    substeps: int = 2
    scan: ScanParams = field(default_factory=ScanParams)
    collision_range: float = COLLISION_RANGE

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if not 0 < self.dt <= 0.05:
            raise ValueError("dt must lie in (0, 0.05]")
        if not 0 < self.max_steer < math.pi / 2:
            raise ValueError("max_steer must lie in (0, pi/2)")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.latency_steps < 0:
            raise ValueError("latency_steps must be >= 0")

    @property
    def control_period(self) -> float:
        return self.dt * self.substeps


@dataclass(frozen=True)
class StepResult:
    state: VehicleState
    scan: np.ndarray
    collided: bool
    min_range: float


def _deriv(s, v_target, tan_delta, p: VehicleParams):
    x, y, th, v = s
    a = min(max(p.k_speed * (v_target - v), p.a_min), p.a_max)
    k = tan_delta / p.wheelbase
    if p.mu_tire is not None and v > 0:
        k_lim = p.mu_tire * 9.81 / (v * v)
        k = min(max(k, -k_lim), k_lim)
    return (v * math.cos(th), v * math.sin(th), v * k, a)


def rk4(state: VehicleState, v_target: float, delta: float, params: VehicleParams,
        dt: float) -> VehicleState:
    """One RK4 step of the bicycle ODEs with speed tracked by a clamped P-law."""
    td = math.tan(delta)
    s0 = (state.x, state.y, state.theta, state.v)
    k1 = _deriv(s0, v_target, td, params)
    s1 = tuple(a + 0.5 * dt * b for a, b in zip(s0, k1))
    k2 = _deriv(s1, v_target, td, params)
    s2 = tuple(a + 0.5 * dt * b for a, b in zip(s0, k2))
    k3 = _deriv(s2, v_target, td, params)
    s3 = tuple(a + dt * b for a, b in zip(s0, k3))
    k4 = _deriv(s3, v_target, td, params)
    x, y, th, v = (a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                   for a, b1, b2, b3, b4 in zip(s0, k1, k2, k3, k4))
    if not all(map(math.isfinite, (x, y, th, v))):
        raise SimulationFault(f"non-finite state after integration: {(x, y, th, v)}")
    return VehicleState(x, y, wrap_angle(th), max(v, 0.0))


def integrate(state: VehicleState, cmd, params: VehicleParams,
              steer: float | None = None) -> tuple[VehicleState, float]:
    """Advance one control period with the command held constant.

    ``steer`` is the current wheel angle; with ``max_steer_rate`` set the wheel
    slews toward the command at most ``max_steer_rate * dt`` per substep and is
    held over each substep. Returns the new state and wheel angle.
    """
    v_target, delta_cmd = cmd
    delta_cmd = min(max(delta_cmd, -params.max_steer), params.max_steer)
    delta = delta_cmd if steer is None else steer
    for _ in range(params.substeps):
        if params.max_steer_rate is not None:
            dmax = params.max_steer_rate * params.dt
            delta = delta + min(max(delta_cmd - delta, -dmax), dmax)
        else:
            delta = delta_cmd
        state = rk4(state, v_target, delta, params, params.dt)
    return state, delta


class Simulator:
    """Single-vehicle simulator owning its noise generator; the grid is shared read-only."""

    def __init__(self, grid: OccupancyGrid, params: VehicleParams | None = None,
                 seed: int | None = 0):
        self.grid = grid
        self.params = params or VehicleParams()
        self.rng = np.random.default_rng(seed)
        self._angles = self.params.scan.angles()
        self.state: VehicleState | None = None
        self.steer = 0.0
        self.time = 0.0
        self._queue: deque = deque()

    def render_scan(self, state: VehicleState) -> np.ndarray:
        sp = self.params.scan
        n = sp.beams
        ranges = cast(self.grid, np.full(n, state.x), np.full(n, state.y),
                      self._angles + state.theta, sp.max_range)
        if sp.noise_std > 0:
            ranges = ranges + self.rng.normal(0.0, sp.noise_std, n)
        return np.clip(ranges, 0.0, sp.max_range)

    def _observe(self, state: VehicleState) -> StepResult:
        scan = self.render_scan(state)
        min_range = float(scan.min())
        in_wall = bool(self.grid.occupied(state.x, state.y))
        collided = min_range < self.params.collision_range or in_wall
        return StepResult(state, scan, collided, min_range)

    def reset(self, spawn, seed: int | None = None) -> StepResult:
        """Place the vehicle at ``spawn`` = (x, y, theta) at rest."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        x, y, th = spawn
        if self.grid.occupied(x, y):
            raise ResetError(f"spawn ({x:.3f}, {y:.3f}) is inside an occupied cell")
        self.state = VehicleState(float(x), float(y), wrap_angle(float(th)), 0.0)
        self.steer = 0.0
        self.time = 0.0
        self._queue = deque([(0.0, 0.0)] * self.params.latency_steps)
        res = self._observe(self.state)
        return replace(res, collided=False)

    def step(self, cmd) -> StepResult:
        """Hold (v_target, delta) for one control period and return the new observation."""
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        if not all(map(math.isfinite, cmd)):
            raise SimulationFault(f"non-finite command {cmd}")
        # commands reach the actuators latency_steps control periods late
        self._queue.append(tuple(cmd))
        applied = self._queue.popleft()
        self.state, self.steer = integrate(self.state, applied, self.params, self.steer)
        self.time += self.params.control_period
        return self._observe(self.state)


def write_trajectory_log(path, rows) -> None:
    """CSV ``t,x,y,theta,v,delta,L_d``; ``rows`` yields 7-tuples."""
    with open(path, "w") as fh:
        fh.write("t,x,y,theta,v,delta,L_d\n")
        for r in rows:
            fh.write(",".join(f"{float(v):.6f}" for v in r) + "\n")
