import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lof.gaussian import GaussianBelief, mahalanobis
from lof.local import correct, estimate_step, missing_innovation, predict, update
from lof.models import AgentPose, EvolutionModel, LinearEvolution, LinearSensor, SensorModel

from conftest import random_spd

SCALAR = LinearEvolution(np.eye(1), np.zeros((1, 1)))


def scalar_sensor(R=1.0):
    return LinearSensor(np.eye(1), np.array([[R]]))


def grid_posterior(prior_mean, prior_var, A, Q, y, R):
    """Brute-force Bayes filter step for a 1-D linear-Gaussian system on a dense grid."""
    m, v = A * prior_mean, A * A * prior_var + Q
    s = math.sqrt(v)
    x = np.linspace(m - 10 * s, m + 10 * s, 10_000)
    prior = np.exp(-0.5 * (x - m) ** 2 / v)
    post = prior * np.exp(-0.5 * (y - x) ** 2 / R)
    post /= np.trapezoid(post, x)
    mean = np.trapezoid(x * post, x)
    return mean, np.trapezoid((x - mean) ** 2 * post, x)


def test_scalar_hand_case():
    est = estimate_step(GaussianBelief([0.0], [[1.0]]), np.array([1.0]), None, SCALAR, scalar_sensor())
    assert est.belief.mean[0] == pytest.approx(0.5, abs=1e-12)
    assert est.belief.cov[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert est.innovation[0] == pytest.approx(1.0, abs=1e-12)
    assert est.innovation_cov[0, 0] == pytest.approx(2.0, abs=1e-12)
    assert est.observed


def test_matches_grid_bayes_filter(rng):
    for _ in range(25):
        a, q, r = rng.uniform(0.5, 1.2), rng.uniform(0.0, 1.0), rng.uniform(0.2, 3.0)
        m0, v0 = rng.normal(), rng.uniform(0.2, 3.0)
        y = rng.normal(a * m0, math.sqrt(a * a * v0 + q + r))
        model = LinearEvolution(np.array([[a]]), np.array([[q]]))
        est = estimate_step(GaussianBelief([m0], [[v0]]), np.array([y]), None, model, scalar_sensor(r))
        gm, gv = grid_posterior(m0, v0, a, q, y, r)
        assert abs(est.belief.mean[0] - gm) < 1e-3
        assert abs(est.belief.cov[0, 0] - gv) < 1e-3


def test_predict_examples():
    p = predict(GaussianBelief(np.zeros(4), np.zeros((4, 4))), EvolutionModel(0.0, 0.5))
    np.testing.assert_allclose(p.cov, EvolutionModel(0.0, 0.5).Q)
    p = predict(GaussianBelief([0.0, 0.0, 1.0, 0.0], np.eye(4)), EvolutionModel(0.0, 0.5))
    np.testing.assert_allclose(p.mean, [0.5, 0.0, 1.0, 0.0])
    b = GaussianBelief([2.0], [[3.0]])
    p = predict(b, SCALAR)
    np.testing.assert_array_equal(p.mean, b.mean)
    np.testing.assert_array_equal(p.cov, b.cov)


def test_uninformative_observation_keeps_prediction():
    pred = GaussianBelief([0.3], [[1.0]])
    est = update(pred, np.array([5.0]), None, scalar_sensor(1e12))
    assert est.belief.mean[0] == pytest.approx(0.3, abs=1e-4)
    assert est.belief.cov[0, 0] == pytest.approx(1.0, abs=1e-4)


def test_zero_innovation_keeps_mean():
    pred = GaussianBelief([0.0, 0.0, 1.0, 0.0], np.eye(4))
    post, _ = correct(pred, np.zeros(2), np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]), np.eye(2))
    np.testing.assert_array_equal(post.mean, pred.mean)


def test_range_bearing_update_shrinks_trace(rng):
    s = SensorModel(fov=360.0)
    for _ in range(100):
        pose = AgentPose(*rng.uniform(0, 30, 2), rng.uniform(-math.pi, math.pi))
        x = np.r_[pose.position + rng.uniform(1, 8, 2) * rng.choice([-1, 1], 2), rng.normal(size=2)]
        pred = GaussianBelief(x + rng.normal(size=4) * 0.3, random_spd(rng, 4, 0.5))
        y = s.measure(pose, x)
        est = update(pred, y, pose, s)
        assert np.trace(est.belief.cov) <= np.trace(pred.cov) + 1e-9
        np.testing.assert_allclose(est.belief.cov, est.belief.cov.T)
        assert np.all(np.linalg.eigvalsh(est.belief.cov) > -1e-12)


def test_bearing_residual_wraps():
    s = SensorModel(fov=360.0)
    pose = AgentPose(0.0, 0.0, 0.0)
    pred = GaussianBelief([-5.0, -0.05, 0.0, 0.0], np.eye(4))
    y = np.array([5.0, math.pi - 0.01])
    est = update(pred, y, pose, s)
    assert abs(est.innovation[1]) < 0.02


@pytest.mark.parametrize("S, expected", [
    (np.eye(2), [math.sqrt(2), math.sqrt(2)]),
    (4 * np.eye(2), [2 * math.sqrt(2), 2 * math.sqrt(2)]),
])
def test_missing_innovation_examples(S, expected):
    d = missing_innovation(S)
    np.testing.assert_allclose(d, expected)
    assert mahalanobis(d, S) == pytest.approx(2.0)


@given(st.integers(0, 100_000))
def test_missing_innovation_mahalanobis_is_two(seed):
    S = random_spd(np.random.default_rng(seed), 2)
    assert mahalanobis(missing_innovation(S), S) == pytest.approx(2.0, rel=1e-12)


def test_missing_observation_returns_prediction():
    prev = GaussianBelief([10.0, 10.0, 1.0, 0.0], np.eye(4))
    evo, s = EvolutionModel(0.0, 0.5), SensorModel()
    est = estimate_step(prev, None, AgentPose(0.0, 0.0, 0.0), evo, s)
    pred = predict(prev, evo)
    np.testing.assert_array_equal(est.belief.mean, pred.mean)
    np.testing.assert_array_equal(est.belief.cov, pred.cov)
    assert not est.observed
    assert mahalanobis(est.innovation, est.innovation_cov) == pytest.approx(2.0)


def test_agents_share_prediction():
    prev = GaussianBelief([10.0, 10.0, 1.0, 0.0], np.eye(4))
    evo, s = EvolutionModel(0.0, 0.5), SensorModel()
    a = estimate_step(prev, None, AgentPose(0.0, 0.0, 0.0), evo, s)
    b = estimate_step(prev, None, AgentPose(25.0, 3.0, 1.0), evo, s)
    np.testing.assert_array_equal(a.belief.mean, b.belief.mean)


def test_covariance_stays_psd_over_episode():
    from lof.env import WorldConfig, rollout, trajectory_rng
    from lof.pipeline import LofTracker

    cfg = WorldConfig(policy="pursuit")
    tr = LofTracker(cfg.assumed_evolution(), cfg.assumed_sensor())
    rollout(cfg, trajectory_rng(0, 0), tracker=tr)
    for row in tr.locals:
        for agents in row:
            for b in agents:
                np.testing.assert_allclose(b.cov, b.cov.T, atol=1e-12)
                np.linalg.cholesky(b.cov + 1e-9 * np.eye(4))
