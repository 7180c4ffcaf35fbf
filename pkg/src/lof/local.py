"""Per-agent local estimation (extended Kalman filter).

Every agent is seeded from the previous *fused* belief, not from its own
previous posterior, so all agents share one prediction per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .gaussian import GaussianBelief, cholesky


@dataclass(frozen=True)
class LocalEstimate:
    belief: GaussianBelief
    innovation: np.ndarray
    innovation_cov: np.ndarray
    observed: bool


def predict(prior: GaussianBelief, model) -> GaussianBelief:
    A = model.A
    cov = A @ prior.cov @ A.T + model.Q
    return GaussianBelief(A @ prior.mean, 0.5 * (cov + cov.T))


def correct(pred: GaussianBelief, innovation, H, R) -> tuple[GaussianBelief, np.ndarray]:
    """Kalman correction for a given innovation; returns (posterior, S)."""
    P = pred.cov
    S = H @ P @ H.T + R
    S = 0.5 * (S + S.T)
    L = cholesky(S)
    K = cho_solve((L, True), H @ P).T
    mean = pred.mean + K @ innovation
    cov = (np.eye(pred.dim) - K @ H) @ P
    return GaussianBelief(mean, 0.5 * (cov + cov.T)), S


def update(pred: GaussianBelief, obs, pose, sensor) -> LocalEstimate:
    """EKF update of ``pred`` with a (non-missing) observation."""
    H = sensor.jacobian(pose, pred.mean)
    innovation = sensor.residual(obs, sensor.measure(pose, pred.mean))
    post, S = correct(pred, innovation, H, sensor.R)
    return LocalEstimate(post, innovation, S, True)


def innovation_cov(pred: GaussianBelief, pose, sensor) -> np.ndarray:
    H = sensor.jacobian(pose, pred.mean)
    S = H @ pred.cov @ H.T + sensor.R
    return 0.5 * (S + S.T)


def missing_innovation(S) -> np.ndarray:
    """Synthetic innovation at Mahalanobis distance exactly 2 under ``S``.

    The direction is fixed to (1, ..., 1)/sqrt(n) in whitened coordinates.
    """
    L = cholesky(S)
    n = L.shape[0]
    return 2.0 * L @ np.full(n, 1.0 / math.sqrt(n))


def estimate_step(prev_fusion: GaussianBelief, obs, pose, evolution, sensor) -> LocalEstimate:
    pred = predict(prev_fusion, evolution)
    if obs is None:
        S = innovation_cov(pred, pose, sensor)
        return LocalEstimate(pred, missing_innovation(S), S, False)
    return update(pred, obs, pose, sensor)
