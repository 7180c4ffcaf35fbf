"""Per-target fusion chains and the trackers built on them.

A tracker keeps one independent chain per target. Each step it turns the
agents' observations of that target into local estimates, weights and a
fused belief, which seeds the next step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import bci_fuse, skf_fuse
from .errors import DegenerateGeometry
from .fusion import FusionConfig, FusionRecord, TsmState, robust_fuse
from .gaussian import GaussianBelief
from .local import LocalEstimate, estimate_step, missing_innovation, predict
from .models import AgentPose
from .weights import MlpParams, exact_likelihood, local_weight, mlp_forward


def initial_belief(x0, pos_std: float = 1.0, vel_std: float = 1.0) -> GaussianBelief:
    """Track initialized at the target's starting position with zero velocity."""
    mean = np.array([x0[0], x0[1], 0.0, 0.0])
    return GaussianBelief(mean, np.diag([pos_std**2, pos_std**2, vel_std**2, vel_std**2]))


def safe_estimate(prev: GaussianBelief, obs, pose, evolution, sensor) -> LocalEstimate:
    """``estimate_step`` that treats a degenerate geometry as a missing sample."""
    try:
        return estimate_step(prev, obs, pose, evolution, sensor)
    except DegenerateGeometry:
        pred = predict(prev, evolution)
        return LocalEstimate(pred, missing_innovation(sensor.R), sensor.R, False)


@dataclass(frozen=True)
class ChainState:
    fused: GaussianBelief
    weights: np.ndarray
    tsm: TsmState

    @classmethod
    def start(cls, prior: GaussianBelief, num_agents: int, tau_init: float = 0.0) -> "ChainState":
        return cls(prior, np.full(num_agents, 1.0 / num_agents), TsmState.initial(num_agents, tau_init))


@dataclass
class StepRecord:
    locals: list
    pdfs: np.ndarray
    likelihoods: np.ndarray
    prev_weights: np.ndarray
    raw_weights: np.ndarray
    fusion: FusionRecord
    D: np.ndarray | None


def lof_step(chain: ChainState, observations, poses, evolution, sensor, mlp: MlpParams | None,
             cfg: FusionConfig, tape=None) -> tuple[ChainState, StepRecord]:
    """Local estimation, weight generation and robust fusion for one target and step."""
    locs = [safe_estimate(chain.fused, y, p, evolution, sensor) for y, p in zip(observations, poses)]
    pdfs = np.array([exact_likelihood(e.innovation, e.innovation_cov) for e in locs])
    innov = np.array([e.innovation for e in locs])
    lik = np.atleast_1d(mlp_forward(mlp, pdfs, innov, tape))
    raw = local_weight(lik, chain.weights)
    rec, tsm = robust_fuse([e.belief for e in locs], raw, chain.tsm, cfg)
    D = tsm.D if cfg.robust and len(locs) > 1 else None
    new = ChainState(rec.fused, rec.fusion_weights, tsm)
    return new, StepRecord(locs, pdfs, lik, chain.weights, raw, rec, D)


# --- trackers ------------------------------------------------------------------

@dataclass
class Tracker:
    """Common bookkeeping: per-step fused and local beliefs for every target."""

    evolution: object
    sensor: object
    pos_std: float = 1.0
    vel_std: float = 1.0
    fused: list = field(default_factory=list)  # [t][j] GaussianBelief
    locals: list = field(default_factory=list)  # [t][j][i] GaussianBelief
    observed: list = field(default_factory=list)  # [t][j][i] bool

    def reset(self, initial, num_agents: int):
        self.fused, self.locals, self.observed = [], [], []
        self._current = [initial_belief(x, self.pos_std, self.vel_std) for x in initial]
        self._start(num_agents)

    def _start(self, num_agents):
        pass

    def positions(self) -> np.ndarray:
        return np.array([b.mean[:2] for b in self._current])

    def step(self, poses, obs):
        """``obs`` is (I, J, 2) with NaN rows for missing samples."""
        fused, locs, seen = [], [], []
        for j in range(obs.shape[1]):
            ys = [None if np.isnan(obs[i, j, 0]) else obs[i, j] for i in range(obs.shape[0])]
            f, loc = self._fuse_target(j, ys, poses)
            fused.append(f)
            locs.append([e.belief for e in loc])
            seen.append([e.observed for e in loc])
        self._current = fused
        self.fused.append(fused)
        self.locals.append(locs)
        self.observed.append(seen)
        return fused

    def _fuse_target(self, j, ys, poses):
        raise NotImplementedError


@dataclass
class LofTracker(Tracker):
    mlp: MlpParams | None = None
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def _start(self, num_agents):
        self._chains = [ChainState.start(b, num_agents, self.fusion.tau_init) for b in self._current]

    def _fuse_target(self, j, ys, poses):
        self._chains[j], rec = lof_step(self._chains[j], ys, poses, self.evolution, self.sensor, self.mlp, self.fusion)
        return rec.fusion.fused, rec.locals


@dataclass
class BciTracker(Tracker):
    rule: str = "inverse_trace"

    def _fuse_target(self, j, ys, poses):
        prev = self._current[j]
        locs = [safe_estimate(prev, y, p, self.evolution, self.sensor) for y, p in zip(ys, poses)]
        return bci_fuse([e.belief for e in locs], self.rule), locs


@dataclass
class SkfTracker(Tracker):
    def _fuse_target(self, j, ys, poses):
        prev = self._current[j]
        # single-sensor updates from the shared prior, used only for fusion gain
        locs = [safe_estimate(prev, y, p, self.evolution, self.sensor) for y, p in zip(ys, poses)]
        fused = skf_fuse(prev, list(zip(poses, ys)), self.evolution, self.sensor, skip_degenerate=True)
        return fused, locs


def track(tracker: Tracker, traj) -> Tracker:
    """Replay a stored trajectory through ``tracker`` (open loop)."""
    tracker.reset(traj.initial, traj.poses.shape[1])
    for k in range(traj.truth.shape[0]):
        tracker.step([AgentPose(*a) for a in traj.poses[k]], traj.obs[k])
    return tracker
