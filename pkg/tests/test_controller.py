import math

import numpy as np
import pytest

from racelab.controller import (L_MAX, L_MIN, FixedLookahead, PurePursuit, PurePursuitConfig,
                                ScheduledLookahead, curvature_command, filter_curvature,
                                find_target, steer, steering_gain)
from racelab.corpus import circle_points, oval_points
from racelab.raceline import Raceline
from racelab.simulator import VehicleParams, VehicleState, integrate
from racelab.track import arc_param, curvature_profile


def make_raceline(points, speed):
    fr = arc_param(points)
    return Raceline(fr.s, points[:, 0], points[:, 1], curvature_profile(points),
                    np.full(len(points), float(speed)))


@pytest.fixture(scope="module")
def circle10():
    return make_raceline(circle_points(10.0, 0.1), 3.0)


@pytest.fixture(scope="module")
def stadium():
    return make_raceline(oval_points(straight=80.0, radius=10.0, spacing=0.25), 3.0)


def test_target_on_straight(stadium):
    x, y, _ = find_target(stadium, (0.0, -10.0, 0.0), 2.0)
    assert x == pytest.approx(2.0, abs=1e-6) and y == pytest.approx(0.0, abs=1e-6)


def test_target_chord_identity(circle10):
    # tangential at (10, 0) heading +y
    x, y, _ = find_target(circle10, (10.0, 0.0, math.pi / 2), 2.0)
    assert math.hypot(x, y) == pytest.approx(2.0, abs=1e-9)
    assert y == pytest.approx(2.0 ** 2 / (2 * 10.0), rel=0.01)


def test_target_wraps(stadium):
    n = len(stadium)
    pose = (stadium.x[n - 2], stadium.y[n - 2], 0.0)
    _, _, j = find_target(stadium, pose, 2.0)
    assert j < 20


def test_curvature_command():
    assert curvature_command(0.0, 2.0) == 0.0
    assert curvature_command(1.0, 2.0) == 0.5
    L, R = 1.7, 8.0
    assert curvature_command(L * L / (2 * R), L) == pytest.approx(1 / R)


def test_filter():
    assert filter_curvature(0.3, 0.9, 1.0) == 0.3
    assert filter_curvature(0.5, 0.0, 0.4) == pytest.approx(0.2)
    g = 0.0
    for k in range(1, 30):
        g = filter_curvature(1.0, g, 0.4)
        assert 1 - g == pytest.approx(0.6 ** k)


def test_gain_schedule():
    cfg = PurePursuitConfig(g_max=1.0, g_min=0.5, v_min=2.0, v_max=10.0)
    assert steering_gain(6.0, cfg) == pytest.approx(0.75)
    assert steering_gain(1.0, cfg) == 1.0 and steering_gain(2.0, cfg) == 1.0
    assert steering_gain(10.0, cfg) == 0.5 and steering_gain(30.0, cfg) == 0.5
    vs = np.linspace(0, 20, 200)
    assert np.all(np.diff([steering_gain(v, cfg) for v in vs]) <= 0)


def test_config_validation():
    with pytest.raises(ValueError):
        PurePursuitConfig(beta=0.0)
    with pytest.raises(ValueError):
        PurePursuitConfig(g_min=2.0)
    with pytest.raises(ValueError):
        PurePursuitConfig(v_min=10.0, v_max=10.0)


def test_steer_cases():
    cfg = PurePursuitConfig(g_min=1.0, g_max=1.0)
    assert steer(3.0, 0.0, 2.0, cfg, 0.0)[0] == 0.0
    g = 0.0
    for _ in range(60):
        d, g = steer(3.0, 2.0 ** 2 / 20.0, 2.0, cfg, g)
    assert d == pytest.approx(math.atan(0.033), rel=0.02)
    assert steer(3.0, 50.0, 0.35, cfg, 0.0)[0] == cfg.max_steer


def test_sources_respect_bounds():
    fx = FixedLookahead(1.2)
    sc = ScheduledLookahead()
    for v in np.linspace(0, 30, 50):
        st = VehicleState(0, 0, 0, v)
        assert fx(st, 0) == 1.2
        assert L_MIN <= sc(st, 0) <= L_MAX
    assert sc(VehicleState(0, 0, 0, 4.0), 0) == pytest.approx(1.3)
    with pytest.raises(ValueError):
        FixedLookahead(5.0)


def test_pursuit_rejects_out_of_bounds(stadium):
    with pytest.raises(ValueError):
        PurePursuit(stadium).steer(VehicleState(0, -10, 0, 1), 4.5)


def test_speed_target_scaled(stadium):
    pp = PurePursuit(stadium, speed_scale=1.1)
    _, v = pp.steer(VehicleState(0.0, -10.0, 0.0, 0.0), 1.0)
    assert v == pytest.approx(3.3)


def _closed_loop(rl, start, L, steps, cfg=None):
    p = VehicleParams()
    pp = PurePursuit(rl, cfg)
    s = start
    out = []
    for _ in range(steps):
        d, v = pp.steer(s, L)
        s, _ = integrate(s, (v, d), p)
        out.append((s.x, s.y))
    return np.array(out)


def test_straight_regulation(stadium):
    xy = _closed_loop(stadium, VehicleState(-20.0, -9.5, 0.0, 3.0), 1.5, 900)
    err = np.abs(xy[:, 1] + 10.0)
    on_straight = xy[:, 0] < 38.0
    after = (xy[:, 0] >= -10.0) & on_straight
    assert np.all(err[after] < 0.05)


def test_circle_tracking(circle10):
    L = 1.5
    cfg = PurePursuitConfig(g_min=1.0, g_max=1.0)
    xy = _closed_loop(circle10, VehicleState(10.0, 0.0, math.pi / 2, 3.0), L, 2000, cfg)
    err = np.abs(np.hypot(*xy[1000:].T) - 10.0)
    assert err.max() <= L * L / 20 + 0.05
