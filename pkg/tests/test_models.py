import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lof.errors import DegenerateGeometry
from lof.models import (AgentPose, EvolutionModel, SensorModel, evolution_matrix, observation_jacobian,
                        observe, process_noise, rotation, step_truth, wrap_angle)

angles = st.floats(-50.0, 50.0, allow_nan=False)


def test_nominal_evolution_couples_velocity():
    A = evolution_matrix(0.0, 0.5)
    np.testing.assert_array_equal(A[:2, 2:], 0.5 * np.eye(2))
    np.testing.assert_array_equal(A[2:, 2:], np.eye(2))
    np.testing.assert_array_equal(A[2:, :2], np.zeros((2, 2)))


def test_rotated_evolution_quarter_turn():
    x = evolution_matrix(90.0, 1.0) @ np.array([0.0, 0.0, 1.0, 0.0])
    np.testing.assert_allclose(x[:2], [0.0, 1.0], atol=1e-15)


def test_default_rotation_block():
    c, s = math.cos(math.radians(20)), math.sin(math.radians(20))
    np.testing.assert_allclose(evolution_matrix(20.0, 0.5)[:2, 2:], 0.5 * np.array([[c, -s], [s, c]]))


def test_process_noise_blocks_and_psd():
    Q = process_noise(0.5)
    np.testing.assert_allclose(Q[:2, :2], 0.5**3 / 3 * np.eye(2))
    np.testing.assert_allclose(Q[:2, 2:], 0.5**2 / 2 * np.eye(2))
    np.testing.assert_allclose(Q[2:, 2:], 0.5 * np.eye(2))
    for dt in np.linspace(0.01, 10, 50):
        np.linalg.cholesky(process_noise(dt))


def test_step_truth_noiseless():
    x = np.array([0.0, 0.0, 1.0, 0.0])
    np.testing.assert_allclose(step_truth(x, EvolutionModel(0.0, 0.5, 0.0), None), [0.5, 0, 1, 0])
    np.testing.assert_allclose(step_truth(x, EvolutionModel(90.0, 0.5, 0.0), None), [0, 0.5, 1, 0], atol=1e-15)


def test_step_truth_noise_covariance():
    m = EvolutionModel(20.0, 0.5)
    x = np.array([1.0, 2.0, 0.3, -0.4])
    rng = np.random.default_rng(0)
    res = np.array([step_truth(x, m, rng) - m.A @ x for _ in range(10_000)])
    C = np.cov(res.T)
    assert np.linalg.norm(C - m.Q) / np.linalg.norm(m.Q) < 0.1


def test_observe_examples():
    pose = AgentPose(0.0, 0.0, 0.0)
    x = np.array([3.0, 4.0, 0.0, 0.0])
    # (3, 4) sits 53 degrees off the heading, outside the default 100 degree cone
    y = observe(pose, x, SensorModel(beta=0.0, fov=360.0), None)
    np.testing.assert_allclose(y, [5.0, 0.9272952180], atol=1e-10)
    y10 = observe(pose, x, SensorModel(beta=10.0, fov=360.0), None)
    assert y10[1] - y[1] == pytest.approx(0.1745329252, abs=1e-10)


def test_observe_out_of_range_and_fov():
    s = SensorModel(max_range=10.0, fov=100.0)
    pose = AgentPose(0.0, 0.0, 0.0)
    assert observe(pose, [10.0 + 1e-9, 0, 0, 0], s, None) is None
    assert observe(pose, [10.0, 0, 0, 0], s, None) is not None
    assert observe(pose, [-3.0, 0, 0, 0], s, None) is None  # behind the agent
    assert observe(pose, [3 * math.cos(math.radians(49)), 3 * math.sin(math.radians(49)), 0, 0], s, None) is not None
    assert observe(pose, [3 * math.cos(math.radians(51)), 3 * math.sin(math.radians(51)), 0, 0], s, None) is None


def test_observe_noise_statistics():
    s = SensorModel(rho=2.0)
    pose = AgentPose(0.0, 0.0, 0.0)
    x = np.array([5.0, 0.0, 0, 0])
    rng = np.random.default_rng(1)
    ys = np.array([observe(pose, x, s, rng) for _ in range(20_000)])
    np.testing.assert_allclose(ys.std(axis=0), np.sqrt(np.diag(s.R)), rtol=0.03)


@given(st.floats(0.1, 9.0), st.floats(-math.pi, math.pi), st.floats(-20, 20), st.floats(-20, 20),
       st.floats(-math.pi, math.pi))
def test_observe_inverts(r, phi, ax, ay, heading):
    pose = AgentPose(ax, ay, heading)
    x = np.array([ax + r * math.cos(phi + pose.heading), ay + r * math.sin(phi + pose.heading), 0, 0])
    y = SensorModel(fov=360.0).measure(pose, x)
    back = pose.position + y[0] * np.array([math.cos(y[1] + pose.heading), math.sin(y[1] + pose.heading)])
    np.testing.assert_allclose(back, x[:2], atol=1e-9)


def test_jacobian_examples():
    o = AgentPose(0.0, 0.0, 0.0)
    np.testing.assert_allclose(observation_jacobian(o, [1, 0, 0, 0]), [[1, 0, 0, 0], [0, 1, 0, 0]])
    np.testing.assert_allclose(observation_jacobian(o, [0, 2, 0, 0]), [[0, 1, 0, 0], [-0.5, 0, 0, 0]])
    with pytest.raises(DegenerateGeometry):
        observation_jacobian(o, [1e-7, 0, 0, 0])


def test_jacobian_matches_finite_differences(rng):
    s = SensorModel(beta=10.0)
    for _ in range(50):
        pose = AgentPose(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        x = np.r_[rng.uniform(-10, 10, 2), rng.normal(size=2)]
        if np.linalg.norm(x[:2] - pose.position) < 0.5:
            continue
        J = np.zeros((2, 4))
        h = 1e-6
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            J[:, k] = s.residual(s.measure(pose, x + e), s.measure(pose, x - e)) / (2 * h)
        np.testing.assert_allclose(s.jacobian(pose, x), J, atol=1e-5)


@given(st.floats(-100, 100))
def test_wrap_angle_range(a):
    w = float(wrap_angle(a))
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_wrap_angle_boundary():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_residual_wraps_bearing():
    d = SensorModel.residual(np.array([1.0, math.pi - 0.01]), np.array([1.0, -math.pi + 0.01]))
    assert abs(d[1]) == pytest.approx(0.02, abs=1e-12)


def test_noise_covariance_and_validation():
    np.testing.assert_allclose(SensorModel(rho=1.0).R, np.diag([0.04, 1e-4]))
    with pytest.raises(ValueError):
        SensorModel(fov=0.0)
    with pytest.raises(ValueError):
        SensorModel(max_range=-1.0)


def test_pose_heading_normalized():
    assert AgentPose(0, 0, 3 * math.pi).heading == pytest.approx(math.pi)


def test_rotation_is_orthonormal():
    R = rotation(37.0)
    np.testing.assert_allclose(R @ R.T, np.eye(2), atol=1e-15)
