"""Train the lookahead policy on one track with the racing environment."""

from __future__ import annotations

import dataclasses
from pathlib import Path

from racelab.environment import EnvConfig, LookaheadEnv, RewardConfig
from racelab.harness.config import ConfigError, ExperimentConfig
from racelab.learning.ppo import PpoConfig
from racelab.learning.train import TrainResult, train
from racelab.scenario import load_scenario


def env_configs(cfg: ExperimentConfig) -> tuple[EnvConfig, EnvConfig]:
    """Training environment (random spawn and speed scale) and fixed evaluation environment."""
    try:
        rw = RewardConfig(**cfg.reward)
    except TypeError as e:
        raise ConfigError(f"bad reward override: {e}") from e
    train_env = EnvConfig(horizons=tuple(cfg.horizons), alpha=cfg.alpha, reward=rw,
                          speed_scale_range=tuple(cfg.train_scale_range), random_spawn=True,
                          latency_steps=cfg.latency_steps)
    eval_env = dataclasses.replace(train_env, speed_scale_range=None,
                                   scale_cycle=tuple(cfg.train_eval_scales), random_spawn=False)
    return train_env, eval_env


def train_policy(cfg: ExperimentConfig, out_dir=None, ppo: PpoConfig | None = None,
                 callback=None) -> TrainResult:
    """PPO on ``cfg.track`` (normally the training track); writes bundles and log to ``out_dir``."""
    sc = load_scenario(cfg.track, cfg.margin)
    ecfg, evcfg = env_configs(cfg)
    ppo = ppo or PpoConfig(total_steps=cfg.train_steps, eval_every=cfg.train_eval_every,
                           eval_episodes=len(cfg.train_eval_scales))
    if out_dir is not None:
        cfg.replace(extra={**cfg.extra, "ppo": ppo.to_dict()}).save(Path(out_dir) / "config.json")
    return train(lambda s: LookaheadEnv(sc, ecfg, seed=s), ppo, seed=cfg.seed,
                 eval_env_factory=lambda s: LookaheadEnv(sc, evcfg, seed=s), out_dir=out_dir,
                 env_config=dataclasses.asdict(ecfg), callback=callback)
