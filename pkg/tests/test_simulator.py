import math

import numpy as np
import pytest

from racelab.simulator import (ResetError, SimulationFault, Simulator, VehicleParams,
                               VehicleState, integrate, rk4, write_trajectory_log)

QUIET = VehicleParams(scan=VehicleParams().scan.__class__(noise_std=0.0))


def test_straight_line_step():
    p = VehicleParams(dt=0.05, substeps=2)
    s, _ = integrate(VehicleState(0, 0, 0, 1.0), (1.0, 0.0), p)
    assert s.x == pytest.approx(0.1, abs=1e-12)
    assert s.y == 0.0 and s.theta == 0.0 and s.v == 1.0


def test_constant_speed_and_heading_exact():
    p = VehicleParams(a_max=0.0, a_min=0.0)
    s = VehicleState(1.0, 2.0, 0.7, 3.3)
    for _ in range(500):
        s, _ = integrate(s, (0.0, 0.0), p)
    assert s.v == 3.3 and s.theta == 0.7


def test_turning_circle_radius():
    p = VehicleParams()
    delta = math.atan(0.2 * p.wheelbase)
    v = 2.0
    s = VehicleState(0.0, 0.0, 0.0, v)
    steps = int(round(2 * math.pi * 5.0 / v / p.control_period))
    xs, ys = [], []
    for _ in range(steps):
        s, _ = integrate(s, (v, delta), p)
        xs.append(s.x)
        ys.append(s.y)
    r = np.hypot(np.array(xs), np.array(ys) - 5.0)
    assert np.max(np.abs(r - 5.0)) / 5.0 < 1e-3


def test_heading_wraps():
    p = VehicleParams()
    s = VehicleState(0, 0, math.pi - 0.01, 5.0)
    s = rk4(s, 5.0, 0.4, p, 0.05)
    assert -math.pi < s.theta <= math.pi


def test_no_reverse():
    p = VehicleParams()
    s = VehicleState(0, 0, 0, 0.1)
    for _ in range(20):
        s, _ = integrate(s, (-5.0, 0.0), p)
    assert s.v == 0.0


def test_nonfinite_command():
    sim = Simulator(_free_grid(), QUIET)
    sim.reset((0.0, 0.0, 0.0))
    with pytest.raises(SimulationFault):
        sim.step((float("nan"), 0.0))


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(dt=0.1)
    with pytest.raises(ValueError):
        VehicleParams(max_steer=2.0)
    with pytest.raises(ValueError):
        VehicleParams(wheelbase=0.0)


def _free_grid():
    from racelab.track import OccupancyGrid

    cells = np.zeros((400, 400), dtype=bool)
    cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = True
    return OccupancyGrid(0.05, (-10.0, -10.0, 0.0), cells)


def test_collision_near_wall():
    g = _free_grid()
    sim = Simulator(g, QUIET)
    # wall cells start at x = 9.95; pose 0.15 m away facing it
    res = sim.reset((9.8, 0.0, 0.0))
    assert not res.collided
    assert sim._observe(sim.state).collided
    assert sim._observe(sim.state).min_range < 0.2


def test_reset_contract(oval):
    sim = Simulator(oval.grid, QUIET)
    res = sim.reset(oval.spawn(0))
    assert (res.state.x, res.state.y) == tuple(oval.raceline.xy[0])
    assert res.state.v == 0.0 and not res.collided
    with pytest.raises(ResetError):
        sim.reset((0.0, 0.0, 0.0))


def test_step_requires_reset(oval):
    with pytest.raises(RuntimeError):
        Simulator(oval.grid).step((1.0, 0.0))


def _drive(sim, oval, n=300, seed=None):
    from racelab.controller import PurePursuit

    pp = PurePursuit(oval.raceline)
    res = sim.reset(oval.spawn(0), seed=seed)
    out = []
    for _ in range(n):
        d, v = pp.steer(res.state, 1.5)
        res = sim.step((v, d))
        out.append((res.state.x, res.state.y, res.state.theta, res.state.v, *res.scan[:5]))
    return np.array(out)


def test_determinism(oval):
    a = _drive(Simulator(oval.grid, seed=4), oval)
    b = _drive(Simulator(oval.grid, seed=4), oval)
    assert np.array_equal(a, b)
    c = _drive(Simulator(oval.grid, seed=4), oval, seed=9)
    d = _drive(Simulator(oval.grid, seed=1), oval, seed=9)
    assert np.array_equal(c, d)


def test_latency_delays_commands():
    g = _free_grid()
    sim = Simulator(g, VehicleParams(latency_steps=3, scan=QUIET.scan))
    sim.reset((0.0, 0.0, 0.0))
    speeds = [sim.step((2.0, 0.0)).state.v for _ in range(5)]
    assert speeds[:3] == [0.0, 0.0, 0.0] and speeds[3] > 0


def test_refinement_lap_endpoint(oval):
    """Halving dt moves the open-loop endpoint of a one-lap command log by < 1 cm."""
    from racelab.controller import PurePursuit

    rl = oval.raceline
    coarse = VehicleParams(dt=0.01, substeps=2)
    pp = PurePursuit(rl)
    s = VehicleState(*oval.spawn(0), 0.0)
    cmds = []
    t = 0.0
    while t < rl.length / 8.0:
        d, v = pp.steer(s, 1.5)
        cmds.append((v, d))
        s, _ = integrate(s, (v, d), coarse)
        t += coarse.control_period
    fine = VehicleParams(dt=0.005, substeps=4)
    f = VehicleState(*oval.spawn(0), 0.0)
    for c in cmds:
        f, _ = integrate(f, c, fine)
    assert math.hypot(f.x - s.x, f.y - s.y) < 0.01


def test_trajectory_log(tmp_path):
    p = tmp_path / "t.csv"
    write_trajectory_log(p, [(0, 1, 2, 0.5, 3, 0.1, 1.5)])
    lines = p.read_text().splitlines()
    assert lines[0] == "t,x,y,theta,v,delta,L_d" and len(lines) == 2
