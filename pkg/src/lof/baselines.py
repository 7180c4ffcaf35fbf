"""Comparison fusers: batch covariance intersection and a centralized sequential KF."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateGeometry
from .gaussian import GaussianBelief, cholesky
from .local import predict, update

BCI_WEIGHT_RULES = ("inverse_trace", "uniform")


def _inv(cov):
    L = cholesky(cov)
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def bci_weights(estimates, rule: str = "inverse_trace") -> np.ndarray:
    if rule == "inverse_trace":
        w = np.array([1.0 / np.trace(e.cov) for e in estimates])
    elif rule == "uniform":
        w = np.ones(len(estimates))
    else:
        raise ValueError(f"unknown BCI weight rule {rule!r}")
    return w / w.sum()


def bci_fuse(estimates, rule: str = "inverse_trace") -> GaussianBelief:
    """Batch covariance intersection: convex combination in information space."""
    if len(estimates) == 1:
        return estimates[0]
    omega = bci_weights(estimates, rule)
    infos = [_inv(e.cov) for e in estimates]
    info = sum(o * Y for o, Y in zip(omega, infos))
    vec = sum(o * Y @ e.mean for o, Y, e in zip(omega, infos, estimates))
    cov = _inv(0.5 * (info + info.T))
    return GaussianBelief(cov @ vec, 0.5 * (cov + cov.T))


def skf_fuse(prior: GaussianBelief, observations, evolution, sensor,
             skip_degenerate: bool = False) -> GaussianBelief:
    """One prediction followed by EKF updates in list order; ``None`` observations are skipped.

    ``observations`` is a sequence of ``(pose, obs)`` pairs.
    """
    belief = predict(prior, evolution)
    for pose, obs in observations:
        if obs is None:
            continue
        try:
            belief = update(belief, obs, pose, sensor).belief
        except DegenerateGeometry:
            if not skip_degenerate:
                raise
    return belief
