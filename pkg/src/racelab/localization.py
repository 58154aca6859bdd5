"""Monte Carlo localization against the occupancy grid with a beam likelihood model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from racelab.track import OccupancyGrid, cast

log = logging.getLogger(__name__)


@dataclass
class ParticleSet:
    poses: np.ndarray    # (N, 3) x, y, psi
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=np.float64).reshape(-1, 3)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.poses),):
            raise ValueError("one weight per particle required")

    def __len__(self) -> int:
        return len(self.poses)

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.poses.copy(), self.weights.copy())


@dataclass(frozen=True)
class MotionNoise:
    sigma_xy: float = 0.04
    sigma_psi: float = 0.02
    sigma_v: float = 0.05


@dataclass(frozen=True)
class BeamModel:
    sigma_hit: float = 0.1
    z_hit: float = 0.85
    z_rand: float = 0.1
    z_max: float = 0.05
    subsample: int = 60
    max_range: float = 30.0

    def __post_init__(self):
        if min(self.z_hit, self.z_rand, self.z_max) < 0 or self.z_hit + self.z_rand + self.z_max <= 0:
            raise ValueError("mixture weights must be non-negative and not all zero")
        if self.sigma_hit <= 0 or self.subsample < 1 or self.max_range <= 0:
            raise ValueError("invalid beam model")


def init_particles(pose, n: int = 1000, radius: float = 2.0, heading_spread: float = 0.1,
                   rng: np.random.Generator | None = None) -> ParticleSet:
    """Uniform over a disc of ``radius`` around ``pose``; headings uniform within +-heading_spread."""
    if n < 100:
        raise ValueError("at least 100 particles required")
    rng = rng if rng is not None else np.random.default_rng()
    r = radius * np.sqrt(rng.random(n))
    a = rng.uniform(-math.pi, math.pi, n)
    x, y, psi = pose
    poses = np.column_stack((x + r * np.cos(a), y + r * np.sin(a),
                             psi + rng.uniform(-heading_spread, heading_spread, n)))
    return ParticleSet(poses, np.full(n, 1.0 / n))


def predict(ps: ParticleSet, cmd, dt: float, noise: MotionNoise | None = None,
            rng: np.random.Generator | None = None, wheelbase: float = 0.33) -> ParticleSet:
    """Propagate every particle through the bicycle kinematics, then add process noise."""
    v, delta = cmd
    n = len(ps)
    noise = noise or MotionNoise(0.0, 0.0, 0.0)
    rng = rng if rng is not None else np.random.default_rng()
    x, y, psi = ps.poses.T
    vi = v + (rng.normal(0.0, noise.sigma_v, n) if noise.sigma_v > 0 else 0.0)
    yaw_rate = vi * math.tan(delta) / wheelbase
    # midpoint heading keeps arcs accurate at racing yaw rates
    mid = psi + 0.5 * yaw_rate * dt
    out = np.column_stack((x + vi * np.cos(mid) * dt, y + vi * np.sin(mid) * dt,
                           psi + yaw_rate * dt))
    if noise.sigma_xy > 0:
        out[:, :2] += rng.normal(0.0, noise.sigma_xy, (n, 2))
    if noise.sigma_psi > 0:
        out[:, 2] += rng.normal(0.0, noise.sigma_psi, n)
    h = out[:, 2]
    off = (h <= -math.pi) | (h > math.pi)
    h[off] = np.arctan2(np.sin(h[off]), np.cos(h[off]))
    return ParticleSet(out, ps.weights.copy())


def beam_log_likelihood(expected: np.ndarray, observed: np.ndarray, model: BeamModel) -> np.ndarray:
    """Per-particle sum over beams of log p(z | z*) for the hit/rand/max mixture.

    ``expected`` is (N, B), ``observed`` is (B,).
    """
    z = np.asarray(observed, dtype=np.float64)[None, :]
    s = model.sigma_hit
    p = model.z_hit * np.exp(-0.5 * ((z - expected) / s) ** 2) / (s * math.sqrt(2 * math.pi))
    p = p + model.z_rand / model.max_range
    if model.z_max > 0:
        p = p + model.z_max * (z >= model.max_range - 1e-9)
    with np.errstate(divide="ignore"):
        return np.log(p).sum(axis=1)


def beam_indices(n_beams: int, subsample: int) -> np.ndarray:
    return np.unique(np.linspace(0, n_beams - 1, min(subsample, n_beams)).round().astype(int))


def update_weights(ps: ParticleSet, scan, scan_angles, grid: OccupancyGrid,
                   model: BeamModel | None = None) -> tuple[ParticleSet, bool]:
    """Reweight by the scan likelihood. Returns the new set and a degeneracy flag.

    ``scan_angles`` are beam angles relative to the vehicle heading. If no
    particle has a positive likelihood the weights are reset to uniform and
    the flag is set.
    """
    model = model or BeamModel()
    scan = np.asarray(scan, dtype=np.float64)
    scan_angles = np.asarray(scan_angles, dtype=np.float64)
    if len(scan) < model.subsample or len(scan) != len(scan_angles):
        raise ValueError("scan must have at least `subsample` beams and match its angles")
    idx = beam_indices(len(scan), model.subsample)
    n, b = len(ps), len(idx)
    x, y, psi = ps.poses.T
    ang = (psi[:, None] + scan_angles[idx][None, :]).ravel()
    expected = cast(grid, np.repeat(x, b), np.repeat(y, b), ang, model.max_range).reshape(n, b)
    logw = np.log(np.maximum(ps.weights, 1e-300)) + beam_log_likelihood(expected, scan[idx], model)
    top = np.max(logw)
    if not np.isfinite(top):
        log.warning("all particle likelihoods vanished; reinitializing weights")
        return ParticleSet(ps.poses.copy(), np.full(n, 1.0 / n)), True
    w = np.exp(logw - top)
    w /= w.sum()
    return ParticleSet(ps.poses.copy(), w), False


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return 1.0 / float(np.sum(w * w))


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling; particle i is drawn floor or ceil of N w_i times."""
    w = np.asarray(weights, dtype=np.float64)
    n = len(w)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def resample_if_needed(ps: ParticleSet, threshold: float = 0.5,
                       rng: np.random.Generator | None = None) -> tuple[ParticleSet, bool]:
    n = len(ps)
    if effective_sample_size(ps.weights) >= threshold * n:
        return ps, False
    rng = rng if rng is not None else np.random.default_rng()
    idx = systematic_resample(ps.weights, rng)
    return ParticleSet(ps.poses[idx].copy(), np.full(n, 1.0 / n)), True


def estimate(ps: ParticleSet) -> tuple[float, float, float]:
    """Weighted mean position and circular-mean heading."""
    w = ps.weights
    x, y, psi = ps.poses.T
    return (float(w @ x), float(w @ y),
            math.atan2(float(w @ np.sin(psi)), float(w @ np.cos(psi))))


class MonteCarloLocalizer:
    """predict / update / resample loop owning its particle set and RNG."""

    def __init__(self, grid: OccupancyGrid, scan_angles, model: BeamModel | None = None,
                 noise: MotionNoise | None = None, n_particles: int = 1000,
                 ess_threshold: float = 0.5, wheelbase: float = 0.33, seed: int | None = 0):
        self.grid = grid
        self.scan_angles = np.asarray(scan_angles, dtype=np.float64)
        self.model = model or BeamModel()
        self.noise = noise or MotionNoise()
        self.n = n_particles
        self.ess_threshold = ess_threshold
        self.wheelbase = wheelbase
        self.rng = np.random.default_rng(seed)
        self.particles: ParticleSet | None = None
        self.degenerate_count = 0

    def initialize(self, pose, radius: float = 2.0, heading_spread: float = 0.1) -> None:
        self.particles = init_particles(pose, self.n, radius, heading_spread, self.rng)

    def step(self, odom, dt: float, scan) -> tuple[float, float, float]:
        """One filter cycle from odometry ``(v, delta)`` and a full scan; returns the pose estimate."""
        if self.particles is None:
            raise RuntimeError("initialize() must be called first")
        ps = predict(self.particles, odom, dt, self.noise, self.rng, self.wheelbase)
        ps, degenerate = update_weights(ps, scan, self.scan_angles, self.grid, self.model)
        self.degenerate_count += int(degenerate)
        est = estimate(ps)
        self.particles, _ = resample_if_needed(ps, self.ess_threshold, self.rng)
        return est
