"""Centralized fusion of local Gaussian estimates.

Plain fusion is the moment-matched mixture of the local beliefs under the
normalized weights. Robust fusion additionally reweights each agent by a
Soft Medoid balancing coefficient computed from a time-smoothed matrix of
pairwise Jensen-Shannon divergences (the Time-Series Soft Medoid, TSM).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, softmax

from .errors import DimensionError, NegativeWeight
from .gaussian import GaussianBelief, js_divergence


def normalize_weights(w) -> np.ndarray:
    """w / sum(w); an all-zero vector maps to uniform weights."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight in {w}")
    total = w.sum()
    if total <= 0:
        return np.full(w.size, 1.0 / w.size)
    return w / total


def mixture_moments(estimates, weights) -> GaussianBelief:
    """Single Gaussian with the mean and covariance of the weighted mixture."""
    if len({e.dim for e in estimates}) != 1:
        raise DimensionError("estimates have inconsistent dimensions")
    means = np.array([e.mean for e in estimates])
    covs = np.array([e.cov for e in estimates])
    w = np.asarray(weights, dtype=np.float64)
    mean = w @ means
    d = means - mean
    cov = np.einsum("i,ijk->jk", w, covs) + np.einsum("i,ij,ik->jk", w, d, d)
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


def soft_medoid_coeffs(weights, D, T: float) -> np.ndarray:
    """Balancing coefficients r = softmax(-(1/T) D w)."""
    w = np.asarray(weights, dtype=np.float64)
    return softmax(-(np.asarray(D, dtype=np.float64) @ w) / T)


def pairwise_js(estimates, method="moment_matched", n=10_000, seed=0) -> np.ndarray:
    I = len(estimates)
    J = np.zeros((I, I))
    for i in range(I):
        for k in range(i + 1, I):
            J[i, k] = J[k, i] = js_divergence(estimates[i], estimates[k], method, n, seed)
    return J


@dataclass(frozen=True)
class TsmState:
    """Smoothed distances and decay accumulators for one tracked target.

    ``D_prev`` is D_{t-2}; ``J_prev``/``J_prev2`` are J_{t-1}/J_{t-2}. Missing
    history is ``None``.
    """

    D: np.ndarray
    tau_hat: np.ndarray
    J_prev: np.ndarray | None = None
    J_prev2: np.ndarray | None = None
    D_prev: np.ndarray | None = None
    t: int = 0

    @classmethod
    def initial(cls, num_agents: int, tau_init: float = 0.0) -> "TsmState":
        return cls(np.zeros((num_agents, num_agents)), np.full((num_agents, num_agents), float(tau_init)))

    @property
    def tau(self) -> np.ndarray:
        return expit(self.tau_hat)


@dataclass(frozen=True)
class FusionConfig:
    """How the centralized stage combines local estimates.

    ``distance`` is ``"tsm"`` (smoothed divergences), ``"sm"`` (current
    divergences only, the original Soft Medoid) or ``"none"`` (plain mixture).
    """

    distance: str = "tsm"
    temperature: float = 100.0
    gamma: float = 1e-3
    tau_init: float = 0.0
    jsd: str = "moment_matched"
    jsd_samples: int = 1000
    jsd_seed: int = 0
    bci_rule: str = "inverse_trace"  # only read by the covariance-intersection baseline

    def __post_init__(self):
        if self.distance not in ("tsm", "sm", "none"):
            raise ValueError(f"unknown fusion distance {self.distance!r}")
        if self.bci_rule not in ("inverse_trace", "uniform"):
            raise ValueError(f"unknown BCI weight rule {self.bci_rule!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def robust(self) -> bool:
        return self.distance != "none"


def tsm_update(state: TsmState, estimates, gamma: float = 1e-3, jsd: str = "moment_matched",
               jsd_samples: int = 1000, jsd_seed: int = 0, J=None) -> TsmState:
    """One step of the smoothed divergence recursion.

    The curvature term uses lagged differences, (D_{t-1} - D_{t-2}) -
    (J_{t-1} - J_{t-2}), so it only needs quantities already computed.
    """
    Jt = pairwise_js(estimates, jsd, jsd_samples, jsd_seed) if J is None else np.asarray(J, dtype=np.float64)
    t = state.t + 1
    if t == 1:
        return TsmState(Jt.copy(), state.tau_hat.copy(), Jt, None, None, t)
    tau_hat = state.tau_hat
    if state.D_prev is not None and state.J_prev2 is not None:
        curvature = (state.D - state.D_prev) - (state.J_prev - state.J_prev2)
        tau_hat = tau_hat + gamma * curvature
    tau = expit(tau_hat)
    D = state.D + tau * (Jt - state.D)
    return TsmState(D, tau_hat, Jt, state.J_prev, state.D, t)


@dataclass(frozen=True)
class FusionRecord:
    fused: GaussianBelief
    fusion_weights: np.ndarray
    balancing: np.ndarray
    effective_weights: np.ndarray


def robust_fuse(estimates, raw_local_weights, state: TsmState, cfg: FusionConfig = FusionConfig()):
    """Normalize, reweight by Soft Medoid coefficients and mixture-fuse.

    Returns ``(FusionRecord, TsmState)``.
    """
    w = normalize_weights(raw_local_weights)
    if cfg.distance == "none" or len(estimates) == 1:
        r = np.full(w.size, 1.0 / w.size)
        new_state = state
    else:
        if cfg.distance == "tsm":
            new_state = tsm_update(state, estimates, cfg.gamma, cfg.jsd, cfg.jsd_samples, cfg.jsd_seed)
        else:
            Jt = pairwise_js(estimates, cfg.jsd, cfg.jsd_samples, cfg.jsd_seed)
            new_state = replace(state, D=Jt, J_prev=Jt, t=state.t + 1)
        r = soft_medoid_coeffs(w, new_state.D, cfg.temperature)
    eff = normalize_weights(r * w)
    return FusionRecord(mixture_moments(estimates, eff), w, r, eff), new_state
