"""One-step lookahead task on logged racing observations, for checking the learner.

Reward is ``-|L - L*(v, kappa)|`` with L* the heuristic ideal lookahead
clipped to the action bounds, so the optimum is known in closed form.
"""

from __future__ import annotations

import numpy as np

from racelab.controller import L_MAX, L_MIN, FixedLookahead


def target_lookahead(obs) -> np.ndarray:
    from racelab.environment import lstar

    obs = np.atleast_2d(obs)
    return np.clip(lstar(obs[:, 0], obs[:, 1:4].max(axis=1)), L_MIN, L_MAX)


def log_observations(scenario, steps: int = 4000, lookahead: float = 1.6,
                     speed_scale: float = 1.0, seed: int = 0) -> np.ndarray:
    """Observations visited while a fixed-lookahead controller drives the track."""
    from racelab.environment import EnvConfig, LookaheadEnv

    env = LookaheadEnv(scenario, EnvConfig(speed_scale=speed_scale, max_steps=steps), seed=seed)
    raw = (lookahead - L_MIN) / (L_MAX - L_MIN) * 2 - 1
    FixedLookahead(lookahead)  # validates the bound
    rows = [env.reset()]
    while len(rows) < steps:
        obs, _, done, _ = env.step(raw)
        rows.append(obs)
        if done:
            rows.append(env.reset())
    return np.array(rows[:steps])


class BanditEnv:
    """``reset`` draws a logged state (or walks them in order); every step ends the episode."""

    def __init__(self, states, seed: int | None = 0, sequential: bool = False):
        self.states = np.asarray(states, dtype=np.float64)
        self.rng = np.random.default_rng(seed)
        self.sequential = sequential
        self._i = -1
        self.obs = None

    def reset(self) -> np.ndarray:
        if self.sequential:
            self._i = (self._i + 1) % len(self.states)
        else:
            self._i = int(self.rng.integers(len(self.states)))
        self.obs = self.states[self._i]
        return self.obs.copy()

    def step(self, raw: float):
        L = L_MIN + (float(np.clip(raw, -1, 1)) + 1) * 0.5 * (L_MAX - L_MIN)
        err = abs(L - float(target_lookahead(self.obs)[0]))
        return self.obs.copy(), -err, True, {"truncated": False, "L": L, "error": err}


def split_states(states, holdout: float = 0.25, seed: int = 0):
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(states))
    k = int(round(len(states) * holdout))
    return states[idx[k:]], states[idx[:k]]


def mean_abs_error(bundle_or_act, states) -> float:
    act = getattr(bundle_or_act, "act_batch", bundle_or_act)
    L = L_MIN + (np.asarray(act(states)).ravel() + 1) * 0.5 * (L_MAX - L_MIN)
    return float(np.mean(np.abs(L - target_lookahead(states))))
