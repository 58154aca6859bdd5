"""Online observation and reward normalization (running moments, clipped outputs)."""

from __future__ import annotations

import numpy as np


class RunningMeanStd:
    """Streaming mean/variance merged batch-wise (parallel-moments formula)."""

    def __init__(self, shape=(), epsilon: float = 1e-4):
        self.mean = np.zeros(shape)
        self.var = np.ones(shape)
        self.count = epsilon

    def update(self, x) -> None:
        x = np.asarray(x, dtype=np.float64)
        x = x.reshape(-1, *self.mean.shape)
        b_mean, b_var, b_count = x.mean(axis=0), x.var(axis=0), x.shape[0]
        delta = b_mean - self.mean
        tot = self.count + b_count
        self.mean = self.mean + delta * b_count / tot
        m2 = self.var * self.count + b_var * b_count + delta ** 2 * self.count * b_count / tot
        self.var = m2 / tot
        self.count = tot

    @property
    def std(self):
        return np.sqrt(self.var)


class Normalizer:
    """Observations scaled by running moments; rewards scaled by the running
    std of the discounted return. ``frozen`` stops statistic updates."""

    def __init__(self, obs_dim: int, gamma: float = 0.99, clip_obs: float = 10.0,
                 clip_reward: float = 10.0, epsilon: float = 1e-8):
        self.obs_rms = RunningMeanStd((obs_dim,))
        self.ret_rms = RunningMeanStd(())
        self.gamma = gamma
        self.clip_obs, self.clip_reward, self.epsilon = clip_obs, clip_reward, epsilon
        self._ret = 0.0
        self.frozen = False

    def obs(self, o, update: bool = True) -> np.ndarray:
        o = np.asarray(o, dtype=np.float64)
        if update and not self.frozen:
            self.obs_rms.update(o)
        return np.clip((o - self.obs_rms.mean) / np.sqrt(self.obs_rms.var + self.epsilon),
                       -self.clip_obs, self.clip_obs)

    def reward(self, r: float, done: bool, update: bool = True) -> float:
        if update and not self.frozen:
            self._ret = self._ret * self.gamma + r
            self.ret_rms.update(np.array([self._ret]))
        out = float(np.clip(r / np.sqrt(self.ret_rms.var + self.epsilon),
                            -self.clip_reward, self.clip_reward))
        if done:
            self._ret = 0.0
        return out

    def state_dict(self) -> dict:
        return {"obs_mean": self.obs_rms.mean, "obs_var": self.obs_rms.var,
                "obs_count": np.array(self.obs_rms.count), "ret_var": np.array(self.ret_rms.var),
                "ret_count": np.array(self.ret_rms.count),
                "clip": np.array([self.clip_obs, self.clip_reward, self.epsilon, self.gamma])}

    @classmethod
    def from_state(cls, d: dict) -> "Normalizer":
        clip_obs, clip_rew, eps, gamma = (float(v) for v in d["clip"])
        n = cls(len(d["obs_mean"]), gamma, clip_obs, clip_rew, eps)
        n.obs_rms.mean = np.array(d["obs_mean"], dtype=np.float64)
        n.obs_rms.var = np.array(d["obs_var"], dtype=np.float64)
        n.obs_rms.count = float(d["obs_count"])
        n.ret_rms.var = np.array(d["ret_var"], dtype=np.float64)
        n.ret_rms.count = float(d["ret_count"])
        return n
