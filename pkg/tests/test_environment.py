import math
from types import SimpleNamespace

import numpy as np
import pytest

from racelab.controller import L_MAX, L_MIN
from racelab.environment import (EnvConfig, LookaheadEnv, LookaheadSmoother, Observer,
                                 RewardConfig, action_to_lookahead, apply_action, lstar, reward)
from racelab.simulator import VehicleState


def test_lstar_example():
    assert lstar(4.0, 0.2) == pytest.approx(0.92, abs=1e-12)


def test_reward_collision_clipped():
    cfg = RewardConfig()
    r = reward(0.0, 0.5, 0.5, (0.0, 0.0, 0.0), 0.1, 0, False, cfg, v_ref=0.0)
    assert r == -20.0
    # unclipped value is -w_c
    wide = RewardConfig(clip=(-100.0, 100.0))
    assert reward(0.0, 0.5, 0.5, (0.0, 0.0, 0.0), 0.1, 0, False, wide) == pytest.approx(-30.0)


def test_reward_all_terms_zero():
    assert reward(0.0, 0.5, 0.5, (0.0, 0.0, 0.0), 5.0, 0, False, RewardConfig()) == 0.0


def test_reward_term_by_term():
    cfg = RewardConfig(clip=(-1e6, 1e6))
    v, L, Lp, ks, dp = 6.0, 1.9, 1.7, (0.05, 0.1, 0.02), 2
    want = (0.35 * v - 1.0 * abs(L - (0.5 + 0.28 * 5.0 - 3.5 * 0.1)) - 0.8 * 0.2
            - 0.5 * 0.1 + 0.9 * dp - 5.0)
    assert reward(v, L, Lp, ks, 5.0, dp, True, cfg, v_ref=5.0) == pytest.approx(want, abs=1e-12)


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(w_v=-1)
    with pytest.raises(ValueError):
        RewardConfig(clip=(5, -5))
    with pytest.raises(ValueError):
        RewardConfig(stall_speed=0)


def test_action_bounds_and_smoothing():
    assert action_to_lookahead(-1.0) == pytest.approx(L_MIN)
    assert action_to_lookahead(1.0) == pytest.approx(L_MAX)
    assert action_to_lookahead(7.0) == L_MAX
    assert apply_action(0.3, 1.0, 1.0) == pytest.approx(action_to_lookahead(0.3))
    assert apply_action(1.0, None, 0.3) == pytest.approx(L_MAX)
    assert apply_action(1.0, 1.0, 0.3) == pytest.approx(0.7 + 0.3 * L_MAX)


def test_smoother_rate_bound():
    sm = LookaheadSmoother(0.3)
    rng = np.random.default_rng(0)
    out = np.array([sm(r) for r in rng.uniform(-1, 1, 500)])
    assert out.min() >= L_MIN and out.max() <= L_MAX
    assert np.abs(np.diff(out)).max() <= 0.3 * (L_MAX - L_MIN) + 1e-12


def _path(kappa, ds=0.1):
    n = len(kappa)
    s = np.arange(n) * ds
    return SimpleNamespace(s=s, length=n * ds, kappa=np.asarray(kappa, float),
                           xy=np.column_stack([s, np.zeros(n)]))


def test_observe_straight():
    obs = Observer(_path(np.zeros(300)))(VehicleState(x=5.0, y=0.0, theta=0.0, v=3.0))
    assert obs.tolist() == [3.0, 0.0, 0.0, 0.0, 0.0]


def test_observe_corner_ahead():
    k = np.zeros(400)
    k[80:] = 0.5  # corner starts 3 m past waypoint 50
    obs = Observer(_path(k), (3.0, 8.0))(VehicleState(x=5.0, y=0.0, theta=0.0, v=2.0))
    assert obs[1] == 0.0 and obs[2] == 0.5 and obs[4] == 0.5


def test_observe_circle(annulus):
    from racelab.scenario import Scenario  # noqa: F401
    k = np.full(200, 0.05)
    ob = Observer(_path(k))
    for i in range(0, 200, 17):
        o = ob(VehicleState(x=i * 0.1, y=0, theta=0, v=1.0), i)
        assert o[4] == 0.0


def test_observe_deterministic(oval):
    ob = Observer(oval.raceline)
    st = VehicleState(*oval.spawn(33), v=4.0)
    assert np.array_equal(ob(st), ob(st))


def test_env_requires_reset(oval):
    env = LookaheadEnv(oval)
    with pytest.raises(RuntimeError):
        env.step(0.0)


def test_env_rejects_nan(oval):
    env = LookaheadEnv(oval)
    env.reset()
    with pytest.raises(ValueError):
        env.step(float("nan"))


def test_env_lap_and_progress_accounting(oval):
    env = LookaheadEnv(oval, EnvConfig(max_laps=2, max_steps=20000))
    n = env.n
    env.reset()
    raw = (2.0 - L_MIN) / (L_MAX - L_MIN) * 2 - 1
    rewards, Ls, done, info = [], [], False, None
    while not done:
        _, r, done, info = env.step(raw)
        rewards.append(r)
        Ls.append(info["L"])
        if info["lap_time"] is not None:
            i = info["index"]
            assert env.ep.progress == n * env.ep.laps + (i if i < n // 2 else i - n)
    assert len(info["laps"]) == 2 and not info["collision"]
    assert min(rewards) >= -20 and max(rewards) <= 50
    assert np.allclose(Ls, 2.0)


def test_env_stall_terminates(oval):
    env = LookaheadEnv(oval, EnvConfig(speed_scale=1e-4))
    env.reset()
    steps = 0
    while True:
        _, r, done, info = env.step(0.0)
        steps += 1
        if done:
            break
    assert info["stall"] and not info["collision"]
    assert steps == pytest.approx(2.0 / env.dt, abs=1)
    assert r <= -5.0 + 0.9 * max(info["dp"], 0) + 0.35 * 0.05


def test_env_collision_terminates(oval):
    env = LookaheadEnv(oval, EnvConfig(speed_scale=3.0))
    env.reset()
    done, info = False, None
    while not done:
        _, r, done, info = env.step(1.0)
    assert info["collision"]
    cfg = RewardConfig()
    assert r <= -cfg.w_c + cfg.w_v * env.state.v + cfg.w_p * max(info["dp"], 0) + 1e-9


def test_env_truncation(oval):
    env = LookaheadEnv(oval, EnvConfig(max_steps=25))
    env.reset()
    for _ in range(25):
        _, _, done, info = env.step(0.0)
    assert done and info["truncated"]


def test_env_reset_determinism(oval):
    def run(seed):
        env = LookaheadEnv(oval, EnvConfig(speed_scale_range=(0.9, 1.2), random_spawn=True),
                           seed=seed)
        out = [env.reset()]
        for k in range(60):
            out.append(env.step(math.sin(k / 7))[0])
        return np.array(out)
    assert np.array_equal(run(3), run(3))
    assert not np.array_equal(run(3), run(4))


def test_env_scale_cycle(oval):
    env = LookaheadEnv(oval, EnvConfig(scale_cycle=(1.0, 1.1, 1.2)))
    seen = []
    for _ in range(5):
        env.reset()
        seen.append(env.pp.speed_scale)
    assert seen == [1.0, 1.1, 1.2, 1.0, 1.1]
    with pytest.raises(ValueError):
        EnvConfig(scale_cycle=())
    with pytest.raises(ValueError):
        EnvConfig(scale_cycle=(1.0, 0.0))
