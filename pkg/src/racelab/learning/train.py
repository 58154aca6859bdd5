"""Rollout collection, periodic deterministic evaluation and best-checkpoint saving."""

from __future__ import annotations

import csv
import logging
import math
import time
from pathlib import Path

import numpy as np

from racelab.learning.bundle import PolicyBundle
from racelab.learning.networks import ActorCritic, TrainingFault
from racelab.learning.normalize import Normalizer
from racelab.learning.ppo import Adam, PpoConfig, RolloutBuffer, ppo_update

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "eval_mean_reward", "eval_ep_len", "explained_variance", "entropy",
               "approx_kl", "clip_frac", "lr")


def evaluate(net: ActorCritic, norm: Normalizer, env, episodes: int = 1,
             max_steps: int | None = None) -> tuple[float, float]:
    """Mean undiscounted raw reward and episode length of the deterministic policy."""
    totals, lengths = [], []
    for _ in range(episodes):
        obs = env.reset()
        total, n = 0.0, 0
        while True:
            a = float(net.act(norm.obs(obs, update=False))[0])
            obs, r, done, _ = env.step(a)
            total += r
            n += 1
            if done or (max_steps is not None and n >= max_steps):
                break
        totals.append(total)
        lengths.append(n)
    return float(np.mean(totals)), float(np.mean(lengths))


class TrainResult:
    def __init__(self, bundle: PolicyBundle, best: PolicyBundle, log_rows: list[dict]):
        self.bundle = bundle
        self.best = best
        self.log = log_rows


def train(env_factory, cfg: PpoConfig | None = None, seed: int = 0, eval_env_factory=None,
          out_dir=None, env_config: dict | None = None, callback=None) -> TrainResult:
    """Train a policy; ``env_factory(seed)`` builds an environment exposing
    ``reset() -> obs`` and ``step(raw) -> (obs, reward, done, info)``.

    Every ``eval_every`` environment steps the deterministic policy is scored
    on a fixed evaluation environment and the best one is kept. With
    ``out_dir`` the CSV log, final and best bundles are written there.
    """
    cfg = cfg or PpoConfig()
    rng = np.random.default_rng(seed)
    env = env_factory(int(rng.integers(2**31)))
    eval_env = (eval_env_factory or env_factory)(int(rng.integers(2**31)))
    obs_dim = len(env.reset())
    net = ActorCritic(obs_dim, rng=np.random.default_rng(int(rng.integers(2**31))),
                      log_std_init=cfg.log_std_init)
    norm = Normalizer(obs_dim, cfg.gamma)
    opt = Adam(net.get_flat().size, cfg.lr0, eps=cfg.adam_eps)
    buf = RolloutBuffer(cfg.n_steps, obs_dim)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def make_bundle(extra=None):
        snap = ActorCritic(obs_dim, rng=np.random.default_rng(0))
        snap.set_flat(net.get_flat())
        frozen = Normalizer.from_state(norm.state_dict())
        frozen.frozen = True
        return PolicyBundle(snap, frozen, cfg.to_dict(), env_config or {}, extra)

    rows: list[dict] = []
    best_reward, best = -math.inf, None
    obs = norm.obs(env.reset())
    step, next_eval = 0, cfg.eval_every
    last_stats: dict = {}
    t0 = time.time()
    try:
        while step < cfg.total_steps:
            buf.pos = 0
            n_roll = min(cfg.n_steps, cfg.total_steps - step)
            while buf.pos < n_roll:
                u, logp, v = net.sample(obs, rng)
                raw_obs, r, done, info = env.step(float(np.tanh(u[0])))
                if info.get("truncated") and not info.get("collision"):
                    # time-limit cut: bootstrap with the value of the state reached
                    r_boot = float(net.value(norm.obs(raw_obs, update=False))[0])
                else:
                    r_boot = 0.0
                r_n = norm.reward(r, done)
                buf.add(obs, u[0], logp[0], v[0], r_n + cfg.gamma * r_boot, done)
                obs = norm.obs(env.reset() if done else raw_obs)
                step += 1
            last_v = float(net.value(obs)[0])
            buf.finish(last_v, cfg.gamma, cfg.lam)
            f = max(0.0, 1.0 - (step - n_roll) / cfg.total_steps)
            last_stats = ppo_update(net, opt, buf, cfg, f, rng)
            if callback is not None:
                callback(step, last_stats)
            while step >= next_eval:
                ev_r, ev_len = evaluate(net, norm, eval_env, cfg.eval_episodes)
                row = {"step": next_eval, "eval_mean_reward": ev_r, "eval_ep_len": ev_len,
                       "explained_variance": last_stats.get("explained_variance", float("nan")),
                       "entropy": last_stats.get("entropy", float("nan")),
                       "approx_kl": last_stats.get("approx_kl", float("nan")),
                       "clip_frac": last_stats.get("clip_frac", float("nan")),
                       "lr": last_stats.get("lr", float("nan"))}
                rows.append(row)
                log.info("step %d eval %.2f len %.0f (%.0fs)", next_eval, ev_r, ev_len,
                         time.time() - t0)
                if ev_r > best_reward:
                    best_reward, best = ev_r, make_bundle({"step": next_eval, "eval_reward": ev_r})
                    if out is not None:
                        best.save(out / "best_policy.npz")
                next_eval += cfg.eval_every
    except (TrainingFault, FloatingPointError):
        if out is not None:
            make_bundle({"step": step, "fault": True}).save(out / "fault_checkpoint.npz")
        raise

    final = make_bundle({"step": step})
    if best is None:
        best = final
    if out is not None:
        final.save(out / "final_policy.npz")
        write_log(out / "train_log.csv", rows)
    return TrainResult(final, best, rows)


def write_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(r[k])) if k != "step" else int(r[k]) for k in LOG_COLUMNS})
