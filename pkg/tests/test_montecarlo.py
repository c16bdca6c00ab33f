import math

import numpy as np
import pytest
from scipy.special import ndtr

from trajrisk.lqg import ClosedLoopModel
from trajrisk.montecarlo import (
    BLOCK,
    collides,
    estimate_failure,
    monte_carlo,
    noise_factors,
    sample_executions,
)
from trajrisk.scenario import PlannedTrajectory, Polytope

from conftest import random_walk_model


def _plan(positions):
    positions = np.asarray(positions, float)
    return PlannedTrajectory(positions, np.diff(positions, axis=0))


def test_noiseless_samples_equal_plan():
    T = 4
    model = ClosedLoopModel(np.broadcast_to(np.eye(4), (T, 4, 4)).copy(), np.zeros((T, 4, 4)))
    plan = _plan(np.linspace([0, 0], [1, 1], T + 1))
    x = sample_executions(model, plan, 10, seed=3)
    assert np.array_equal(x, np.broadcast_to(plan.positions, x.shape))


def test_random_walk_variance():
    sigma2 = 0.01
    model = random_walk_model(5, sigma2)
    plan = _plan(np.zeros((6, 1)))
    n = 100_000
    x = sample_executions(model, plan, n, seed=1)[:, :, 0]
    for t in (1, 3, 5):
        var = x[:, t].var(ddof=1)
        se = t * sigma2 * math.sqrt(2.0 / (n - 1))
        assert abs(var - t * sigma2) <= 4 * se


def test_identical_seeds_identical_batches():
    model = random_walk_model(6, 0.1)
    plan = _plan(np.zeros((7, 1)))
    a = sample_executions(model, plan, 500, seed=9)
    b = sample_executions(model, plan, 500, seed=9)
    c = sample_executions(model, plan, 500, seed=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_prefix_property_across_blocks():
    model = random_walk_model(3, 1.0)
    plan = _plan(np.zeros((4, 1)))
    whole = sample_executions(model, plan, BLOCK + 100, seed=4)
    tail = sample_executions(model, plan, 200, seed=4, start=BLOCK - 100)
    assert np.array_equal(whole[BLOCK - 100:BLOCK + 100], tail)


def test_noise_factor_reconstructs_covariance():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(3, 4, 2))
    W = G @ G.transpose(0, 2, 1)  # rank 2
    S = noise_factors(ClosedLoopModel(np.zeros((3, 4, 4)), W))
    np.testing.assert_allclose(S @ S.transpose(0, 2, 1), W, atol=1e-12)


def test_no_obstacles():
    model = random_walk_model(4, 0.1)
    res = monte_carlo(model, _plan(np.zeros((5, 1))), [], 1000, seed=0)
    assert res.estimate == 0.0 and res.std_error == 0.0


def test_certain_failure():
    model = random_walk_model(3, 1e-4)
    plan = _plan(np.zeros((4, 1)) + 0.5)
    wall = Polytope.from_halfspaces([[1.0]], [-0.5])  # x >= -0.5 covers the plan by 100 sigma
    res = monte_carlo(model, plan, [wall], 2000, seed=0)
    assert res.estimate == 1.0


def test_single_step_half_space():
    sigma2 = 0.04
    model = random_walk_model(1, sigma2)
    plan = _plan([[0.0], [0.1]])
    wall = Polytope.from_halfspaces([[1.0]], [0.3])
    res = monte_carlo(model, plan, [wall], 100_000, seed=2)
    exact = float(ndtr((0.1 - 0.3) / math.sqrt(sigma2)))
    assert abs(res.estimate - exact) <= 3 * res.std_error


def test_faces_count_as_collision():
    positions = np.array([[[0.0, 0.0], [0.5, 0.4]]])
    box = Polytope.box((0.4, 0.4), (0.6, 0.6))
    assert collides(positions, [box])[0]


def test_single_sample_is_bernoulli():
    model = random_walk_model(2, 0.5)
    wall = Polytope.from_halfspaces([[1.0]], [0.0])
    res = monte_carlo(model, _plan([[-0.1], [-0.1], [-0.1]]), [wall], 1, seed=0)
    assert res.estimate in (0.0, 1.0) and res.n_samples == 1


def test_se_formula():
    batch = np.zeros((400, 2, 1))
    batch[:100, 1, 0] = 1.0
    wall = Polytope.from_halfspaces([[1.0]], [0.5])
    a = estimate_failure(batch, [wall])
    b = estimate_failure(np.concatenate([batch, batch]), [wall])
    assert a.estimate == b.estimate == 0.25
    assert b.std_error ** 2 == pytest.approx(a.std_error ** 2 / 2, rel=1e-12)
    with pytest.raises(ValueError):
        estimate_failure(batch[:0], [wall])


def test_streamed_equals_materialized():
    model = random_walk_model(4, 0.05)
    plan = _plan(np.zeros((5, 1)))
    wall = Polytope.from_halfspaces([[1.0]], [0.3])
    n = BLOCK * 2 + 17
    res = monte_carlo(model, plan, [wall], n, seed=6)
    batch = sample_executions(model, plan, n, seed=6)
    assert res.failures == int(collides(batch, [wall]).sum())
