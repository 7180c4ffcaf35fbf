"""Training the learned likelihood by truncated backpropagation.

Each fusion step contributes the Gaussian negative log-likelihood of the
true state under the fused belief. The previous fused belief and fusion
weights entering a step are treated as constants, so one step's gradient
only flows back through that step's weight computation:

    NLL -> fused moments -> effective weights -> balancing coefficients
        -> fusion weights -> raw local weights -> MLP output -> parameters
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTape, ShapeMismatch, SingularCovariance, TrainingError
from .fusion import FusionConfig
from .gaussian import GaussianBelief, cholesky
from .pipeline import ChainState, StepRecord, initial_belief, lof_step
from .models import AgentPose
from .tape import GradTape
from .weights import PARAM_NAMES, MlpParams
from .weights import backward as mlp_backward

TRUNCATION_MODES = ("step", "full")
LOG_COLUMNS = ("iteration", "loss", "grad_norm", "wall_ms")


def _inverse(cov):
    L = cholesky(cov)
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv, 2.0 * np.sum(np.log(np.diag(L)))


def nll_loss(truth, fused: GaussianBelief) -> float:
    """log det(cov) + e^T cov^-1 e with e = truth - mean (no 2*pi constant)."""
    e = np.atleast_1d(np.asarray(truth, dtype=np.float64)) - fused.mean
    P, ld = _inverse(np.atleast_2d(fused.cov))
    return float(ld + e @ P @ e)


def nll_grad(truth, fused: GaussianBelief):
    """Gradients of ``nll_loss`` with respect to the fused mean and covariance."""
    e = np.atleast_1d(np.asarray(truth, dtype=np.float64)) - fused.mean
    P, _ = _inverse(np.atleast_2d(fused.cov))
    Pe = P @ e
    return -2.0 * Pe, P - np.outer(Pe, Pe)


def weight_gradients(record: StepRecord, g_mean, g_cov, temperature: float = 100.0) -> np.ndarray:
    """Map (dL/dmean, dL/dcov) of the fused belief to dL/d(MLP outputs).

    Follows the forward pass in reverse: mixture moments, the renormalized
    product r*w, the Soft Medoid coefficients r(w) when distances are
    available, normalization of the raw weights and the product with the
    previous fusion weights.
    """
    fus = record.fusion
    means = np.array([e.belief.mean for e in record.locals])
    covs = np.array([e.belief.cov for e in record.locals])
    a, w, r = fus.effective_weights, fus.fusion_weights, fus.balancing
    d = means - fus.fused.mean
    G = 0.5 * (g_cov + g_cov.T)
    g_a = means @ g_mean + np.einsum("jk,ijk->i", G, covs) + np.einsum("ij,jk,ik->i", d, G, d)

    v = r * w
    g_v = (g_a - a @ g_a) / v.sum()
    g_w = r * g_v
    if record.D is not None:
        g_r = w * g_v
        g_z = r * g_r - r * (r @ g_r)
        g_w = g_w - record.D.T @ g_z / temperature

    raw = record.raw_weights
    total = raw.sum()
    if total <= 0:
        return np.zeros_like(raw)
    g_raw = (g_w - w @ g_w) / total
    return record.prev_weights * g_raw


def loss_gradients(record: StepRecord, truth, tape: GradTape, temperature: float = 100.0):
    """Per-step NLL and its gradient with respect to every MLP parameter."""
    if tape is None or len(tape) == 0:
        raise EmptyTape("the step's forward pass was not recorded")
    g_mean, g_cov = nll_grad(truth, record.fusion.fused)
    g_lik = weight_gradients(record, g_mean, g_cov, temperature)
    return nll_loss(truth, record.fusion.fused), mlp_backward(tape, g_lik)


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "AdamState":
        d = params.as_dict()
        return cls({k: np.zeros_like(a) for k, a in d.items()}, {k: np.zeros_like(a) for k, a in d.items()})


def adam_step(params: MlpParams, grads: dict, st: AdamState, lr: float) -> tuple[MlpParams, AdamState]:
    """Bias-corrected Adam update; returns new parameters and state."""
    p = params.as_dict()
    t = st.step + 1
    new_p, new_m, new_v = {}, {}, {}
    for k in PARAM_NAMES:
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != p[k].shape:
            raise ShapeMismatch(f"gradient for {k} has shape {g.shape}, expected {p[k].shape}")
        m = st.beta1 * st.m[k] + (1.0 - st.beta1) * g
        v = st.beta2 * st.v[k] + (1.0 - st.beta2) * g * g
        m_hat = m / (1.0 - st.beta1**t)
        v_hat = v / (1.0 - st.beta2**t)
        new_p[k] = p[k] - lr * m_hat / (np.sqrt(v_hat) + st.eps)
        new_m[k], new_v[k] = m, v
    return MlpParams.from_dict(new_p), AdamState(new_m, new_v, t, st.beta1, st.beta2, st.eps)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 500
    batch_size: int = 16
    lr: float = 0.003
    dataset: str | None = None
    seed: int = 0
    truncation: str = "step"
    hidden: int = 32
    record_timings: bool = False

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("iterations, batch_size and hidden must be positive")
        if not 0.0 <= self.lr < 1.0:
            raise ValueError("learning rate must lie in [0, 1)")
        if self.truncation not in TRUNCATION_MODES:
            raise ValueError(f"unknown truncation mode {self.truncation!r}")


@dataclass
class TrainResult:
    params: MlpParams
    log: list = field(default_factory=list)  # rows of LOG_COLUMNS


def trajectory_loss(traj, params: MlpParams, evolution, sensor, fusion: FusionConfig,
                    with_grad: bool = True, pos_std: float = 1.0, vel_std: float = 1.0):
    """Mean per-step NLL over all targets and steps, with its parameter gradient."""
    H, I, J = traj.truth.shape[0], traj.poses.shape[1], traj.truth.shape[1]
    total = 0.0
    grads = {k: np.zeros_like(a) for k, a in params.as_dict().items()}
    for j in range(J):
        chain = ChainState.start(initial_belief(traj.initial[j], pos_std, vel_std), I, fusion.tau_init)
        for t in range(H):
            poses = [AgentPose(*a) for a in traj.poses[t]]
            ys = [None if np.isnan(traj.obs[t, i, j, 0]) else traj.obs[t, i, j] for i in range(I)]
            tape = GradTape() if with_grad else None
            chain, rec = lof_step(chain, ys, poses, evolution, sensor, params, fusion, tape)
            truth = traj.truth[t, j]
            if with_grad:
                loss, g = loss_gradients(rec, truth, tape, fusion.temperature)
                for k in grads:
                    grads[k] += g[k]
            else:
                loss = nll_loss(truth, rec.fusion.fused)
            total += loss
    n = H * J
    return total / n, {k: g / n for k, g in grads.items()}


def train(trajectories, cfg: TrainConfig, evolution, sensor, fusion: FusionConfig = FusionConfig(),
          init: MlpParams | None = None) -> TrainResult:
    """Fit the MLP by Adam on mini-batches of stored trajectories.

    Batches are drawn from a stream seeded by ``cfg.seed`` that is separate
    from any simulation stream, so the dataset never depends on batch order.
    """
    if cfg.truncation != "step":
        raise NotImplementedError("only truncation='step' is implemented")
    if not trajectories:
        raise ValueError("empty dataset")
    rng = np.random.default_rng([cfg.seed, 0x7472])
    params = MlpParams.init(cfg.seed, cfg.hidden) if init is None else init.copy()
    state = AdamState.zeros_like(params)
    log = []
    for it in range(1, cfg.iterations + 1):
        t0 = time.perf_counter()
        batch = rng.choice(len(trajectories), size=cfg.batch_size, replace=cfg.batch_size > len(trajectories))
        loss = 0.0
        grads = {k: np.zeros_like(a) for k, a in params.as_dict().items()}
        try:
            for b in batch:
                l, g = trajectory_loss(trajectories[b], params, evolution, sensor, fusion)
                loss += l / cfg.batch_size
                for k in grads:
                    grads[k] += g[k] / cfg.batch_size
        except (SingularCovariance, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise TrainingError(f"iteration {it}: {exc}") from exc
        flat = np.concatenate([g.ravel() for g in grads.values()])
        if not (np.isfinite(loss) and np.all(np.isfinite(flat))):
            raise TrainingError(f"iteration {it}: non-finite loss or gradient")
        params, state = adam_step(params, grads, state, cfg.lr)
        wall = (time.perf_counter() - t0) * 1e3 if cfg.record_timings else None
        log.append((it, loss, float(np.linalg.norm(flat)), wall))
    return TrainResult(params, log)


def write_log(path, log, meta: dict | None = None) -> None:
    """Training log CSV; ``wall_ms`` is left empty when timings were not recorded.

    ``meta`` entries are written first as ``# key = value`` comment lines.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k} = {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for it, loss, gn, wall in log:
                w.writerow([it, repr(float(loss)), repr(float(gn)), "" if wall is None else f"{wall:.3f}"])
    except OSError as exc:
        raise OSError(f"cannot write training log {os.fspath(path)!r}: {exc}") from exc


def smoothed(values, window: int = 10) -> np.ndarray:
    """Trailing moving average used to judge training progress."""
    v = np.asarray(values, dtype=np.float64)
    c = np.cumsum(np.insert(v, 0, 0.0))
    n = np.minimum(np.arange(1, v.size + 1), window)
    return (c[1:] - c[np.arange(1, v.size + 1) - n]) / n
