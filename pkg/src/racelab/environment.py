"""Lookahead-selection decision process wrapped around the simulator and Pure Pursuit.

Observation ``[v, k0, k1, k2, dk]`` (speed and absolute raceline curvature at
the projected waypoint and two arc-length horizons ahead), one continuous
action in [-1, 1] mapped onto the lookahead bounds and exponentially smoothed,
and a clipped shaped reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from racelab.controller import L_MAX, L_MIN, PurePursuit, PurePursuitConfig, nearest_index
from racelab.scenario import Scenario
from racelab.simulator import Simulator, VehicleParams

OBS_DIM = 5

# Actuation latency of the racing setup, in control periods (4 x 20 ms). With
# zero delay a kinematic vehicle tolerates any lookahead on a straight and
# short-lookahead oscillation only appears at several times the planned speed.
RACING_LATENCY_STEPS = 4


def racing_vehicle(**overrides) -> VehicleParams:
    return VehicleParams(**{"latency_steps": RACING_LATENCY_STEPS, **overrides})


@dataclass(frozen=True)
class RewardConfig:
    w_v: float = 0.35
    w_e: float = 1.0
    w_j: float = 0.8
    w_k: float = 0.5
    w_c: float = 30.0
    w_p: float = 0.9
    w_s: float = 5.0
    lstar_coeffs: tuple = (0.50, 0.28, 3.5)
    clip: tuple = (-20.0, 50.0)
    collision_range: float = 0.2
    stall_speed: float = 0.05
    stall_duration: float = 2.0

    def __post_init__(self):
        ws = (self.w_v, self.w_e, self.w_j, self.w_k, self.w_c, self.w_p, self.w_s)
        if min(ws) < 0:
            raise ValueError("reward weights must be non-negative")
        if not self.clip[0] < self.clip[1]:
            raise ValueError("clip bounds must be ordered")
        if min(self.collision_range, self.stall_speed, self.stall_duration) <= 0:
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class EnvConfig:
    horizons: tuple = (3.0, 8.0)
    alpha: float = 0.3
    reward: RewardConfig = field(default_factory=RewardConfig)
    speed_scale: float = 1.0
    # when set, every reset draws the scale uniformly from this interval
    speed_scale_range: tuple | None = None
    # when set (and no range), successive resets cycle through these scales
    scale_cycle: tuple | None = None
    max_steps: int = 3000
    max_laps: int | None = None
    random_spawn: bool = False
    latency_steps: int = RACING_LATENCY_STEPS

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.horizons[0] <= 0 or self.horizons[1] < self.horizons[0]:
            raise ValueError("horizons must be positive and ordered")
        if self.speed_scale <= 0:
            raise ValueError("speed_scale must be positive")
        if self.scale_cycle is not None and (not self.scale_cycle or min(self.scale_cycle) <= 0):
            raise ValueError("scale_cycle must hold positive scales")


def lstar(v: float, kmax: float, coeffs=(0.50, 0.28, 3.5)) -> float:
    """Heuristic ideal lookahead."""
    a, b, c = coeffs
    return a + b * v - c * kmax


def action_to_lookahead(raw: float, bounds=(L_MIN, L_MAX)) -> float:
    lo, hi = bounds
    return float(min(max(lo + (raw + 1.0) * 0.5 * (hi - lo), lo), hi))


class LookaheadSmoother:
    """``L_bar = (1 - alpha) L_bar_prev + alpha L``; the first call passes L through."""

    def __init__(self, alpha: float = 0.3, bounds=(L_MIN, L_MAX)):
        self.alpha, self.bounds = alpha, bounds
        self.value: float | None = None

    def reset(self):
        self.value = None

    def __call__(self, raw: float) -> float:
        L = action_to_lookahead(raw, self.bounds)
        self.value = L if self.value is None else (1 - self.alpha) * self.value + self.alpha * L
        return self.value


def apply_action(raw: float, prev: float | None, alpha: float, bounds=(L_MIN, L_MAX)) -> float:
    L = action_to_lookahead(raw, bounds)
    return L if prev is None else (1 - alpha) * prev + alpha * L


def horizon_offsets(raceline, h: float) -> np.ndarray:
    """For each waypoint, the index of the first waypoint at least ``h`` meters ahead."""
    s = np.asarray(raceline.s)
    total = raceline.length
    n = len(s)
    target = s + h
    wraps = np.floor(target / total)
    j = np.searchsorted(s, target - wraps * total, side="left")
    return (j % n).astype(np.int64)


class Observer:
    """Builds observations for one raceline; horizon lookups are precomputed."""

    def __init__(self, raceline, horizons=(3.0, 8.0)):
        self.kappa = np.abs(np.asarray(raceline.kappa))
        self.xy = np.ascontiguousarray(raceline.xy)
        self.j1 = horizon_offsets(raceline, horizons[0])
        self.j2 = horizon_offsets(raceline, horizons[1])

    def nearest(self, state) -> int:
        return nearest_index(self.xy, state.x, state.y)

    def __call__(self, state, index: int | None = None) -> np.ndarray:
        i = self.nearest(state) if index is None else index
        k0, k1, k2 = self.kappa[i], self.kappa[self.j1[i]], self.kappa[self.j2[i]]
        return np.array([state.v, k0, k1, k2, k1 - k0])


def observe(state, raceline, horizons=(3.0, 8.0)) -> np.ndarray:
    return Observer(raceline, horizons)(state)


def reward(v: float, L: float, L_prev: float, kappas, min_range: float, dp: float,
           stalled: bool, cfg: RewardConfig, v_ref: float | None = None) -> float:
    """Seven-term shaped reward, clipped.

    ``v`` is the speed after the step; ``v_ref`` (default ``v``) and ``kappas``
    describe the state the lookahead was chosen in and define L*.
    """
    kmax = max(kappas)
    v_ref = v if v_ref is None else v_ref
    r = (cfg.w_v * v
         - cfg.w_e * abs(L - lstar(v_ref, kmax, cfg.lstar_coeffs))
         - cfg.w_j * abs(L - L_prev)
         - cfg.w_k * kmax
         - cfg.w_c * float(min_range < cfg.collision_range)
         + cfg.w_p * dp
         - cfg.w_s * float(stalled))
    return float(min(max(r, cfg.clip[0]), cfg.clip[1]))


class LapTimer:
    """Start/finish line along waypoint 0's normal; crossings interpolated within a step."""

    def __init__(self, raceline, half_width: float = 3.0):
        self.p0 = np.array([raceline.x[0], raceline.y[0]])
        self.t0 = np.asarray(raceline.tangent[0])
        self.n0 = np.asarray(raceline.normal[0])
        self.half_width = half_width
        self.reset(0.0, None)

    def reset(self, t: float, state, armed: bool = True):
        """``armed=False`` (spawn away from the line) makes the first crossing start timing."""
        self.t_last = t if armed else None
        self.laps: list[float] = []
        self._prev = None if state is None else self._side(state)

    def _side(self, state):
        d = np.array([state.x, state.y]) - self.p0
        return float(d @ self.t0), float(d @ self.n0)

    def update(self, t_prev: float, t: float, state) -> float | None:
        """Feed the post-step state; returns the lap time when a lap completes."""
        cur = self._side(state)
        prev, self._prev = self._prev, cur
        if prev is None:
            return None
        a, b = prev[0], cur[0]
        if a < 0.0 <= b and abs(cur[1]) <= self.half_width and abs(prev[1]) <= self.half_width:
            tc = t_prev + (t - t_prev) * (-a) / (b - a)
            if self.t_last is None:
                self.t_last = tc
                return None
            lap = tc - self.t_last
            self.t_last = tc
            self.laps.append(lap)
            return lap
        return None


@dataclass
class EpisodeState:
    steps: int = 0
    L_prev: float | None = None
    index: int = 0
    progress: int = 0
    stall_time: float = 0.0
    laps: int = 0


class LookaheadEnv:
    """Gym-style environment: ``reset() -> obs``, ``step(raw) -> (obs, reward, done, info)``.

    ``info`` carries ``collision``, ``stall``, ``truncated``, ``lap_time`` (when
    a lap closes this step), ``L``, ``dp`` and the running ``laps`` list.
    """

    def __init__(self, scenario: Scenario, cfg: EnvConfig | None = None,
                 pp_cfg: PurePursuitConfig | None = None, vehicle: VehicleParams | None = None,
                 seed: int | None = 0):
        self.scenario = scenario
        self.cfg = cfg or EnvConfig()
        self.rng = np.random.default_rng(seed)
        vehicle = vehicle or racing_vehicle(latency_steps=self.cfg.latency_steps)
        self.sim = Simulator(scenario.grid, vehicle, seed=int(self.rng.integers(2**31)))
        self.pp = PurePursuit(scenario.raceline, pp_cfg, self.cfg.speed_scale)
        self.observer = Observer(scenario.raceline, self.cfg.horizons)
        self.timer = LapTimer(scenario.raceline)
        self.n = len(scenario.raceline)
        self.ep = EpisodeState()
        self.episodes = 0
        self.obs = None
        self.state = None

    @property
    def dt(self) -> float:
        return self.sim.params.control_period

    def reset(self, spawn_index: int | None = None) -> np.ndarray:
        cfg = self.cfg
        if spawn_index is None:
            spawn_index = int(self.rng.integers(self.n)) if cfg.random_spawn else 0
        if cfg.speed_scale_range is not None:
            lo, hi = cfg.speed_scale_range
            self.pp.speed_scale = float(self.rng.uniform(lo, hi))
        elif cfg.scale_cycle is not None:
            self.pp.speed_scale = float(cfg.scale_cycle[self.episodes % len(cfg.scale_cycle)])
        else:
            self.pp.speed_scale = cfg.speed_scale
        self.episodes += 1
        self.pp.reset()
        res = self.sim.reset(self.scenario.spawn(spawn_index), seed=int(self.rng.integers(2**31)))
        self.state = res.state
        self.ep = EpisodeState(index=spawn_index % self.n)
        self.timer.reset(0.0, self.state, armed=self.ep.index == 0)
        self.obs = self.observer(self.state, self.ep.index)
        return self.obs.copy()

    def step(self, raw: float):
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        cfg, ep = self.cfg, self.ep
        raw = float(raw)
        if not math.isfinite(raw):
            raise ValueError("non-finite action")
        L = apply_action(raw, ep.L_prev, cfg.alpha)
        L_prev = L if ep.L_prev is None else ep.L_prev
        obs_prev = self.obs
        delta, v_target = self.pp.steer(self.state, L)
        t_prev = self.sim.time
        res = self.sim.step((v_target, delta))
        self.state = res.state

        i = self.observer.nearest(self.state)
        dp = (i - ep.index) % self.n
        if dp > self.n // 2:
            dp -= self.n
        ep.progress += dp
        ep.index = i
        ep.steps += 1
        ep.stall_time = ep.stall_time + self.dt if self.state.v < cfg.reward.stall_speed else 0.0
        stalled = ep.stall_time >= cfg.reward.stall_duration
        lap_time = self.timer.update(t_prev, self.sim.time, self.state)
        if lap_time is not None:
            ep.laps += 1

        self.obs = self.observer(self.state, i)
        r = reward(self.state.v, L, L_prev, obs_prev[1:4], res.min_range, dp, stalled,
                   cfg.reward, v_ref=float(obs_prev[0]))
        ep.L_prev = L
        collided = res.collided
        lap_done = cfg.max_laps is not None and ep.laps >= cfg.max_laps
        truncated = ep.steps >= cfg.max_steps and not (collided or stalled or lap_done)
        done = collided or stalled or lap_done or truncated
        info = {"collision": collided, "stall": stalled, "truncated": truncated,
                "lap_time": lap_time, "laps": list(self.timer.laps), "L": L, "dp": dp,
                "index": i, "delta": delta, "min_range": res.min_range}
        return self.obs.copy(), r, done, info


class LearnedLookahead:
    """Lookahead source driven by a trained policy bundle (deterministic mean action)."""

    def __init__(self, bundle, raceline, horizons=None, alpha: float | None = None):
        self.bundle = bundle
        meta = bundle.env_config
        self.observer = Observer(raceline, tuple(horizons or meta.get("horizons", (3.0, 8.0))))
        self.smoother = LookaheadSmoother(alpha if alpha is not None else meta.get("alpha", 0.3))

    def reset(self):
        self.smoother.reset()

    def __call__(self, state, index: int) -> float:
        obs = self.observer(state, index)
        return self.smoother(self.bundle.act(obs))
