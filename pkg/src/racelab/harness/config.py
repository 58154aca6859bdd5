"""Experiment configuration: one JSON-serializable record fixing every run constant."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from racelab.environment import RACING_LATENCY_STEPS

STRATEGIES = ("fixed", "scheduled", "learned")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    track: str = "oval"
    train_track: str = "training"
    heldout_tracks: tuple = ("chicane", "hairpin")
    strategy: str = "fixed"
    lookahead: float = 2.0
    sched_a: float = 0.30
    sched_b: float = 0.25
    policy: str | None = None
    speed_scale: float = 1.0
    laps: int = 10
    # untimed first lap from rest; the clock starts at the first line crossing
    out_lap: bool = True
    seed: int = 0
    out: str = "runs/latest"
    mcl: bool = False
    latency_steps: int = RACING_LATENCY_STEPS
    margin: float = 0.5
    horizons: tuple = (3.0, 8.0)
    alpha: float = 0.3
    fixed_grid: tuple = (0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
    scales: tuple = (0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3)
    # policy training: per-episode speed-scale range, evaluation scales (one episode
    # each), steps between evaluations, reward overrides
    train_scale_range: tuple = (0.95, 1.3)
    train_eval_scales: tuple = (1.0, 1.1, 1.2)
    train_eval_every: int = 20_000
    train_steps: int = 800_000
    reward: dict = field(default_factory=lambda: {"w_e": 0.0})
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.speed_scale <= 0:
            raise ConfigError("speed scale must be positive")
        if self.laps < 1:
            raise ConfigError("lap count must be >= 1")
        if self.strategy == "learned" and not self.policy:
            raise ConfigError("strategy 'learned' needs a policy bundle (--policy)")
        lo, hi = self.train_scale_range
        if not 0 < lo <= hi:
            raise ConfigError("train_scale_range must be positive and ordered")
        if not self.train_eval_scales or min(self.train_eval_scales) <= 0:
            raise ConfigError("train_eval_scales must hold positive scales")
        if self.latency_steps < 0:
            raise ConfigError("latency_steps must be >= 0")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
