"""Evaluation metrics and the episode/experiment runner.

Errors are measured on the position components by default
(``components="position"``); ``"full"`` also includes velocity.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateDenominator, NonPositive
from .env import WorldConfig, config_hash, dataset_columns, rollout, trajectory_rng, world_meta
from .fusion import FusionConfig
from .gaussian import log_pdf
from .pipeline import BciTracker, LofTracker, SkfTracker
from .weights import MlpParams

DETECTION_THRESHOLD = 0.646
METRICS = ("mse_db", "fg", "mnll", "detection")
COMPONENTS = {"position": (0, 1), "full": (0, 1, 2, 3)}

# variant name -> (uses the MLP, fusion distance, TSM learning rate or None for default)
LOF_VARIANTS = {
    "lof": (True, "tsm", None),
    "lof_t": (True, "none", None),  # without TSM
    "lof_m": (False, "tsm", None),  # without the MLP
    "lof_tm": (False, "none", None),  # without both
    "lof_sm": (True, "sm", None),  # original Soft Medoid distances
    "lof_tau05": (True, "tsm", 0.0),  # decay factor frozen at 0.5
}
METHODS = tuple(LOF_VARIANTS) + ("bci", "skf")


def mse_db(mse: float) -> float:
    if not mse > 0:
        raise NonPositive(f"MSE must be positive, got {mse}")
    return 10.0 * float(np.log10(mse))


def fusion_gain(e_locals, e_fused: float) -> float:
    """Percent error reduction of the fused estimate against the mean local error."""
    e = np.asarray(e_locals, dtype=np.float64)
    total = e.sum()
    if not total > 0:
        raise DegenerateDenominator("sum of local errors must be positive")
    return float((total - e.size * e_fused) / total * 100.0)


def mnll(truths, beliefs) -> float:
    """Mean negative log-likelihood of each truth under its belief."""
    vals = [-log_pdf(np.asarray(x, dtype=np.float64), b) for x, b in zip(truths, beliefs)]
    return float(np.mean(vals))


def detection_ratio(truths, means, th: float = DETECTION_THRESHOLD) -> float:
    """Fraction of estimates whose position error is below ``th``."""
    if th <= 0:
        raise ValueError("threshold must be positive")
    err = np.linalg.norm(np.asarray(means)[..., :2] - np.asarray(truths)[..., :2], axis=-1)
    return float(np.mean(err < th))


@dataclass
class EpisodeResult:
    method: str
    seed: int
    index: int
    truth: np.ndarray  # (H, J, 4)
    fused_mean: np.ndarray  # (H, J, 4)
    fused_cov: np.ndarray  # (H, J, 4, 4)
    local_mse: np.ndarray  # (I,)
    fused_mse: float
    nll: np.ndarray  # (H, J)
    detected: np.ndarray  # (H, J) bool

    @property
    def metrics(self) -> dict[str, float]:
        return {
            "mse_db": mse_db(self.fused_mse),
            "fg": fusion_gain(self.local_mse, self.fused_mse),
            "mnll": float(self.nll.mean()),
            "detection": float(self.detected.mean()),
        }


def make_tracker(method: str, cfg: WorldConfig, mlp: MlpParams | None = None,
                 fusion: FusionConfig = FusionConfig()):
    ev, se = cfg.assumed_evolution(), cfg.assumed_sensor()
    if method == "bci":
        return BciTracker(ev, se, rule=fusion.bci_rule)
    if method == "skf":
        return SkfTracker(ev, se)
    if method not in LOF_VARIANTS:
        raise ConfigError(f"unknown method {method!r}", key="method")
    use_mlp, distance, gamma = LOF_VARIANTS[method]
    if use_mlp and mlp is None:
        raise ConfigError(f"method {method!r} needs a checkpoint", key="checkpoint")
    fcfg = replace(fusion, distance=distance, gamma=fusion.gamma if gamma is None else gamma)
    return LofTracker(ev, se, mlp=mlp if use_mlp else None, fusion=fcfg)


def episode_result(method, seed, index, traj, tracker, components="position",
                   th: float = DETECTION_THRESHOLD) -> EpisodeResult:
    idx = list(COMPONENTS[components])
    mean = np.array([[b.mean for b in row] for row in tracker.fused])
    cov = np.array([[b.cov for b in row] for row in tracker.fused])
    local = np.array([[[b.mean for b in agents] for agents in row] for row in tracker.locals])  # (H, J, I, 4)
    truth = traj.truth
    fused_mse = float(np.mean((mean[..., idx] - truth[..., idx]) ** 2))
    local_mse = np.mean((local[..., idx] - truth[:, :, None, idx]) ** 2, axis=(0, 1, 3))
    nll = np.array([[-log_pdf(truth[t, j, idx], b.marginal(idx)) for j, b in enumerate(row)]
                    for t, row in enumerate(tracker.fused)])
    err = np.linalg.norm(mean[..., :2] - truth[..., :2], axis=-1)
    return EpisodeResult(method, seed, index, truth, mean, cov, local_mse, fused_mse, nll, err < th)


def run_episode(cfg: WorldConfig, method: str, mlp: MlpParams | None = None, seed: int = 0, index: int = 0,
                fusion: FusionConfig = FusionConfig(), components: str = "position",
                th: float = DETECTION_THRESHOLD) -> EpisodeResult:
    """Roll out one seeded episode with ``method`` tracking in the loop."""
    if components not in COMPONENTS:
        raise ConfigError(f"unknown mse_components {components!r}", key="eval.mse_components")
    tracker = make_tracker(method, cfg, mlp, fusion)
    traj = rollout(cfg, trajectory_rng(seed, index), tracker=tracker)
    return episode_result(method, seed, index, traj, tracker, components, th)


def _episode_metrics(args):
    return run_episode(*args).metrics


@dataclass
class Aggregate:
    method: str
    metric: str
    mean: float
    std: float
    n: int


def evaluate(cfg: WorldConfig, methods, n_episodes: int, seed: int = 0, mlp: MlpParams | None = None,
             fusion: FusionConfig = FusionConfig(), components: str = "position",
             th: float = DETECTION_THRESHOLD, threads: int = 1) -> tuple[list[Aggregate], dict]:
    """Mean and std of every metric per method over episodes ``0..n_episodes-1``.

    Every method sees the same episode seeds. Returns the aggregate rows and
    the raw per-episode metrics keyed by method.
    """
    if n_episodes < 1:
        raise ValueError("need at least one episode")
    for m in methods:
        make_tracker(m, cfg, mlp, fusion)  # validates names and checkpoints up front
    jobs = [(cfg, m, mlp, seed, k, fusion, components, th) for m in methods for k in range(n_episodes)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_episode_metrics, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_episode_metrics(j) for j in jobs]
    raw, rows = {}, []
    for a, m in enumerate(methods):
        per = results[a * n_episodes : (a + 1) * n_episodes]
        raw[m] = {k: np.array([p[k] for p in per]) for k in METRICS}
        for k in METRICS:
            v = raw[m][k]
            rows.append(Aggregate(m, k, float(v.mean()), float(v.std()), n_episodes))
    return rows, raw


def write_results(path, rows, chash: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "metric", "mean", "std", "n", "config_hash"])
            for r in rows:
                w.writerow([r.method, r.metric, repr(r.mean), repr(r.std), r.n, chash])
    except OSError as exc:
        raise OSError(f"cannot write results {os.fspath(path)!r}: {exc}") from exc


def read_results(path) -> list[Aggregate]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [Aggregate(r["method"], r["metric"], float(r["mean"]), float(r["std"]), int(r["n"]))
                for r in csv.DictReader(fh)]


def trace_columns(I: int, J: int) -> list[str]:
    cols = dataset_columns(I, J)
    cols += [f"f{j}_{c}" for j in range(J) for c in ("p1", "p2", "v1", "v2")]
    cols += [f"f{j}_c{a}{b}" for j in range(J) for a in range(4) for b in range(a, 4)]
    return cols


def write_trace(path, traj, tracker, meta: dict | None = None) -> None:
    """One episode in the dataset layout plus fused means and covariance upper triangles."""
    I, J = traj.num_agents, traj.num_targets
    iu = np.triu_indices(4)
    lines = ["# lof-trace v1"] + [f"# {k} = {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(trace_columns(I, J)))

    def fmt(v):
        return "NA" if np.isnan(v) else repr(float(v))

    for k in range(traj.horizon):
        f = ["0", str(k + 1)]
        f += [fmt(v) for v in traj.truth[k].ravel()]
        f += [fmt(v) for v in traj.poses[k].ravel()]
        f += [fmt(v) for v in traj.obs[k].ravel()]
        f += ["1" if d else "0" for d in traj.disturbed[k].ravel()]
        f += [fmt(v) for b in tracker.fused[k] for v in b.mean]
        f += [fmt(v) for b in tracker.fused[k] for v in b.cov[iu]]
        lines.append(",".join(f))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace {os.fspath(path)!r}: {exc}") from exc


def evaluation_meta(cfg: WorldConfig, fusion: FusionConfig, extra: dict | None = None) -> dict:
    meta = world_meta(cfg)
    meta.update({f"fusion.{k}": v for k, v in vars(fusion).items()})
    meta.update(extra or {})
    return meta


def evaluation_hash(cfg: WorldConfig, fusion: FusionConfig, extra: dict | None = None) -> str:
    return config_hash(evaluation_meta(cfg, fusion, extra))
