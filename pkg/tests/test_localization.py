import math

import numpy as np
import pytest

from racelab.localization import (BeamModel, MonteCarloLocalizer, MotionNoise, ParticleSet,
                                  beam_log_likelihood, effective_sample_size, estimate,
                                  init_particles, predict, resample_if_needed,
                                  systematic_resample, update_weights)
from racelab.simulator import ScanParams
from racelab.track import raycast

ANGLES = ScanParams().angles()


def _set(poses, weights=None):
    poses = np.asarray(poses, dtype=float)
    n = len(poses)
    return ParticleSet(poses, np.full(n, 1 / n) if weights is None else weights)


def test_min_particles():
    with pytest.raises(ValueError):
        init_particles((0, 0, 0), n=50)


def test_init_disc():
    ps = init_particles((1.0, 2.0, 0.3), n=5000, radius=2.0, heading_spread=0.1,
                        rng=np.random.default_rng(0))
    r = np.hypot(ps.poses[:, 0] - 1.0, ps.poses[:, 1] - 2.0)
    assert r.max() <= 2.0 and np.median(r) == pytest.approx(2.0 / math.sqrt(2), rel=0.05)
    assert np.all(np.abs(ps.poses[:, 2] - 0.3) <= 0.1)
    assert ps.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_predict_zero_noise_zero_cmd():
    ps = init_particles((0, 0, 0), 200, rng=np.random.default_rng(1))
    out = predict(ps, (0.0, 0.0), 0.02)
    assert np.array_equal(out.poses, ps.poses)


def test_predict_straight_translates_identically():
    ps = _set(np.tile([1.0, -2.0, 0.4], (150, 1)))
    out = predict(ps, (2.0, 0.0), 0.1)
    d = out.poses - ps.poses
    assert np.allclose(d, d[0]) and d[0, 0] == pytest.approx(0.2 * math.cos(0.4))


def test_predict_random_walk_spread():
    rng = np.random.default_rng(5)
    ps = _set(np.zeros((4000, 3)))
    noise = MotionNoise(0.05, 0.0, 0.0)
    for _ in range(100):
        ps = predict(ps, (0.0, 0.0), 0.02, noise, rng)
    spread = ps.poses[:, 0].std()
    assert spread == pytest.approx(0.05 * math.sqrt(100), rel=0.3)


def test_true_pose_scores_best(oval):
    g = oval.grid
    true = np.array(oval.spawn(80))
    scan = raycast(g, true, ANGLES, 30.0)
    rng = np.random.default_rng(2)
    offs = rng.normal(size=(40, 2))
    offs = offs / np.hypot(*offs.T)[:, None]
    cands = [true] + [true + np.array([dx, dy, 0.0]) for dx, dy in offs]
    cands = [c for c in cands if not g.occupied(c[0], c[1])]
    ps, _ = update_weights(_set(cands), scan, ANGLES, g)
    assert np.argmax(ps.weights) == 0


def test_identical_particles_uniform(oval):
    pose = oval.spawn(10)
    scan = raycast(oval.grid, pose, ANGLES, 30.0)
    ps, _ = update_weights(_set(np.tile(pose, (120, 1))), scan, ANGLES, oval.grid)
    assert np.allclose(ps.weights, 1 / 120)


def test_pure_uniform_model(oval):
    pose = np.array(oval.spawn(10))
    scan = raycast(oval.grid, pose, ANGLES, 30.0)
    ps = init_particles(pose, 300, radius=0.5, rng=np.random.default_rng(0))
    model = BeamModel(z_hit=0.0, z_rand=1.0, z_max=0.0)
    out, _ = update_weights(ps, scan, ANGLES, oval.grid, model)
    assert np.allclose(out.weights, 1 / 300)


def test_weights_finite_normalized(oval):
    pose = np.array(oval.spawn(200))
    scan = raycast(oval.grid, pose, ANGLES, 30.0)
    ps = init_particles(pose, 500, radius=2.0, rng=np.random.default_rng(3))
    out, _ = update_weights(ps, scan, ANGLES, oval.grid)
    assert np.all(np.isfinite(out.weights)) and out.weights.sum() == pytest.approx(1, abs=1e-9)


def test_degenerate_likelihood_resets(oval):
    pose = np.array(oval.spawn(0))
    scan = raycast(oval.grid, pose, ANGLES, 30.0)
    ps = init_particles(pose, 200, radius=0.5, rng=np.random.default_rng(0))
    model = BeamModel(z_rand=0.0, z_max=0.0, sigma_hit=1e-4)
    out, flag = update_weights(ps, scan + 5.0, ANGLES, oval.grid, model)
    assert flag and np.allclose(out.weights, 1 / 200)


def test_update_requires_beams(oval):
    with pytest.raises(ValueError):
        update_weights(_set(np.zeros((100, 3))), np.ones(10), np.zeros(10), oval.grid)


def test_likelihood_monotone_in_mismatch():
    m = BeamModel()
    obs = np.full(10, 5.0)
    exp = np.array([np.full(10, 5.0), np.full(10, 5.1), np.full(10, 5.5)])
    ll = beam_log_likelihood(exp, obs, m)
    assert ll[0] > ll[1] > ll[2]


def test_resample_uniform_unchanged():
    ps = _set(np.random.default_rng(0).normal(size=(200, 3)))
    out, did = resample_if_needed(ps, 0.5, np.random.default_rng(1))
    assert not did and out is ps
    assert effective_sample_size(ps.weights) == pytest.approx(200)


def test_resample_point_mass():
    w = np.zeros(150)
    w[17] = 1.0
    ps = _set(np.random.default_rng(0).normal(size=(150, 3)), w)
    out, did = resample_if_needed(ps, 0.5, np.random.default_rng(0))
    assert did and np.all(out.poses == ps.poses[17])


def test_systematic_multiplicity_bounds():
    rng = np.random.default_rng(11)
    w = rng.dirichlet(np.ones(100))
    for _ in range(200):
        counts = np.bincount(systematic_resample(w, rng), minlength=100)
        assert np.all(np.abs(counts - 100 * w) < 1 + 1e-9)


def test_estimate_cases():
    p = np.array([3.0, -1.0, 0.5])
    assert estimate(_set(np.tile(p, (100, 1)))) == pytest.approx(tuple(p))
    two = _set([[0, 0, math.radians(170)], [0, 0, math.radians(-170)]] + [[0, 0, 0]] * 98,
               np.array([0.5, 0.5] + [0.0] * 98))
    assert abs(estimate(two)[2]) == pytest.approx(math.pi, abs=1e-9)
    w = np.zeros(100)
    w[42] = 1.0
    ps = _set(np.random.default_rng(0).normal(size=(100, 3)), w)
    assert estimate(ps) == pytest.approx(tuple(ps.poses[42]))


def test_estimate_permutation_invariant():
    rng = np.random.default_rng(4)
    ps = _set(rng.normal(size=(300, 3)), rng.dirichlet(np.ones(300)))
    perm = rng.permutation(300)
    other = _set(ps.poses[perm], ps.weights[perm])
    assert np.allclose(estimate(ps), estimate(other), atol=1e-12)


def test_localizer_requires_init(oval):
    loc = MonteCarloLocalizer(oval.grid, ANGLES)
    with pytest.raises(RuntimeError):
        loc.step((1.0, 0.0), 0.02, np.ones(len(ANGLES)))
