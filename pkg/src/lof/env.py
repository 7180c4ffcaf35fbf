"""Collaborative-detection world: moving targets, moving agents, noisy sensing.

A world is advanced one step at a time. Targets follow the (possibly
rotated) linear dynamics with a speed cap and elastic reflection at the map
edge; agents follow a scripted policy. ``rollout`` produces a full
``Trajectory`` and can drive a tracker in the loop so a pursuit policy can
chase the tracker's own estimates.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .models import AgentPose, EvolutionModel, SensorModel, observe, step_truth, wrap_angle

POLICIES = ("random_waypoint", "pursuit")
DISTURBANCE_KINDS = ("none", "default", "random", "strong")


@dataclass(frozen=True)
class DisturbancePattern:
    kind: str = "default"
    onset: int = 20
    bias: tuple = (1.0, 0.1)
    prob: float = 0.25
    strength: float = 2.0

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError("disturbance probability must lie in [0, 1]")

    @property
    def bias_vector(self) -> np.ndarray:
        scale = self.strength if self.kind == "strong" else 1.0
        return scale * np.asarray(self.bias, dtype=np.float64)


@dataclass(frozen=True)
class WorldConfig:
    map_size: float = 30.0
    horizon: int = 40
    dt: float = 0.5
    num_agents: int = 4
    num_targets: int = 2
    target_max_speed: float = 2.0
    agent_max_speed: float = 2.0
    alpha: float = 20.0
    beta: float = 10.0
    rho: float = 1.0
    sigma_r: float = 0.2
    sigma_b: float = 0.01
    fov: float = 100.0
    max_range: float = 10.0
    policy: str = "random_waypoint"
    standoff: float = 3.0
    swap_models: bool = False
    disturbance: DisturbancePattern = field(default_factory=DisturbancePattern)
    seed: int = 0

    def __post_init__(self):
        if self.num_agents < 1 or self.num_targets < 1:
            raise ValueError("need at least one agent and one target")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.target_max_speed <= 0 or self.agent_max_speed <= 0:
            raise ValueError("speeds must be positive")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown agent policy {self.policy!r}")
        if self.disturbance.kind != "none" and self.disturbance.onset >= self.horizon:
            raise ValueError("disturbance onset must precede the horizon")

    def replace(self, **kw) -> "WorldConfig":
        return dataclasses.replace(self, **kw)

    # ground truth uses the rotated models, estimators the nominal ones,
    # unless swap_models flips the roles
    def truth_evolution(self) -> EvolutionModel:
        return EvolutionModel(0.0 if self.swap_models else self.alpha, self.dt)

    def assumed_evolution(self) -> EvolutionModel:
        return EvolutionModel(self.alpha if self.swap_models else 0.0, self.dt)

    def _sensor(self, beta):
        return SensorModel(beta, self.rho, self.sigma_r, self.sigma_b, self.fov, self.max_range)

    def truth_sensor(self) -> SensorModel:
        return self._sensor(0.0 if self.swap_models else self.beta)

    def assumed_sensor(self) -> SensorModel:
        return self._sensor(self.beta if self.swap_models else 0.0)


@dataclass
class World:
    cfg: WorldConfig
    rng: np.random.Generator
    t: int
    targets: np.ndarray  # (J, 4)
    agents: np.ndarray  # (I, 3) x, y, heading
    waypoints: np.ndarray  # (I, 2)
    faulty: int

    def poses(self) -> list[AgentPose]:
        return [AgentPose(*a) for a in self.agents]


@dataclass
class Trajectory:
    """One episode. Arrays are indexed by step t = 1..H at position t - 1."""

    initial: np.ndarray  # (J, 4) truth at t = 0
    initial_poses: np.ndarray  # (I, 3)
    truth: np.ndarray  # (H, J, 4)
    poses: np.ndarray  # (H, I, 3)
    obs: np.ndarray  # (H, I, J, 2), NaN where missing
    disturbed: np.ndarray  # (H, I, J) bool
    faulty: int = -1

    @property
    def horizon(self) -> int:
        return self.truth.shape[0]

    @property
    def num_agents(self) -> int:
        return self.poses.shape[1]

    @property
    def num_targets(self) -> int:
        return self.truth.shape[1]

    def observation(self, t: int, i: int, j: int):
        y = self.obs[t, i, j]
        return None if np.isnan(y[0]) else y.copy()

    def pose(self, t: int, i: int) -> AgentPose:
        return AgentPose(*self.poses[t, i])


def _cap_speed(v, vmax):
    s = math.hypot(v[0], v[1])
    return v * (vmax / s) if s > vmax else v


def reflect(x, size: float) -> np.ndarray:
    """Mirror a (x1, x2, v1, v2) state back into [0, size]^2, negating velocity."""
    x = np.array(x, dtype=np.float64)
    for k in (0, 1):
        while x[k] < 0.0 or x[k] > size:
            if x[k] > size:
                x[k] = 2.0 * size - x[k]
            else:
                x[k] = -x[k]
            x[k + 2] = -x[k + 2]
    return x


def init_world(cfg: WorldConfig, rng: np.random.Generator | None = None) -> World:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    L, J, I = cfg.map_size, cfg.num_targets, cfg.num_agents
    pos = rng.uniform(0.0, L, size=(J, 2))
    ang = rng.uniform(-math.pi, math.pi, size=J)
    spd = rng.uniform(0.0, cfg.target_max_speed, size=J)
    targets = np.column_stack([pos, spd * np.cos(ang), spd * np.sin(ang)])
    agents = np.column_stack([rng.uniform(0.0, L, size=(I, 2)), rng.uniform(-math.pi, math.pi, size=I)])
    waypoints = rng.uniform(0.0, L, size=(I, 2))
    faulty = int(rng.integers(I))
    return World(cfg, rng, 0, targets, agents, waypoints, faulty)


def _move_agent(a, goal, step, standoff=0.0):
    d = goal - a[:2]
    dist = math.hypot(d[0], d[1])
    heading = math.atan2(d[1], d[0]) if dist > 1e-12 else a[2]
    travel = min(step, max(dist - standoff, 0.0))
    pos = a[:2] + (travel / dist) * d if dist > 1e-12 else a[:2]
    return np.array([pos[0], pos[1], float(wrap_angle(heading))]), dist <= step + standoff


def step_world(world: World, estimates=None) -> World:
    """Advance targets and agents by one step.

    ``estimates`` (J, 2) are the positions a pursuit policy chases; without
    them pursuit chases the true positions.
    """
    cfg, rng = world.cfg, world.rng
    evo = cfg.truth_evolution()
    targets = world.targets.copy()
    for j in range(cfg.num_targets):
        x = step_truth(targets[j], evo, rng)
        x[2:] = _cap_speed(x[2:], cfg.target_max_speed)
        targets[j] = reflect(x, cfg.map_size)

    agents, waypoints = world.agents.copy(), world.waypoints.copy()
    step = cfg.agent_max_speed * cfg.dt
    if cfg.policy == "random_waypoint":
        for i in range(cfg.num_agents):
            agents[i], arrived = _move_agent(agents[i], waypoints[i], step)
            if arrived:
                waypoints[i] = rng.uniform(0.0, cfg.map_size, size=2)
    else:
        goals = targets[:, :2] if estimates is None else np.asarray(estimates, dtype=np.float64)
        for i in range(cfg.num_agents):
            d = np.hypot(*(goals - agents[i, :2]).T)
            agents[i], _ = _move_agent(agents[i], goals[int(np.argmin(d))], step, cfg.standoff)
        agents[:, :2] = np.clip(agents[:, :2], 0.0, cfg.map_size)
    return dataclasses.replace(world, t=world.t + 1, targets=targets, agents=agents, waypoints=waypoints)


def is_disturbed(pattern: DisturbancePattern, agent: int, t: int, faulty: int, rng=None) -> bool:
    if pattern.kind == "none":
        return False
    if pattern.kind == "random":
        return bool(rng.random() < pattern.prob)
    return agent == faulty and t >= pattern.onset


def apply_bias(obs, pattern: DisturbancePattern):
    if obs is None:
        return None
    y = np.asarray(obs, dtype=np.float64) + pattern.bias_vector
    y[1] = wrap_angle(y[1])
    return y


def inject_disturbance(obs, pattern: DisturbancePattern, agent: int, t: int, faulty: int, rng=None):
    """Bias ``obs`` when ``agent`` is disturbed at step ``t``; MISSING passes through."""
    if obs is None:
        return None
    if is_disturbed(pattern, agent, t, faulty, rng):
        return apply_bias(obs, pattern)
    return np.asarray(obs, dtype=np.float64).copy()


def sense(world: World):
    """All agents observe all targets. Returns obs (I, J, 2) with NaN rows and flags (I, J)."""
    cfg, rng = world.cfg, world.rng
    sensor, pattern = cfg.truth_sensor(), cfg.disturbance
    I, J = cfg.num_agents, cfg.num_targets
    obs = np.full((I, J, 2), np.nan)
    flags = np.zeros((I, J), dtype=bool)
    poses = world.poses()
    for i in range(I):
        hit = is_disturbed(pattern, i, world.t, world.faulty, rng)
        for j in range(J):
            y = observe(poses[i], world.targets[j], sensor, rng)
            if y is None:
                continue
            if hit:
                y = apply_bias(y, pattern)
                flags[i, j] = True
            obs[i, j] = y
    return obs, flags


def rollout(cfg: WorldConfig, rng: np.random.Generator | None = None, tracker=None) -> Trajectory:
    """Simulate one episode; ``tracker`` (if given) is fed every step."""
    world = init_world(cfg, rng)
    initial, initial_poses = world.targets.copy(), world.agents.copy()
    H, I, J = cfg.horizon, cfg.num_agents, cfg.num_targets
    truth = np.empty((H, J, 4))
    poses = np.empty((H, I, 3))
    obs = np.empty((H, I, J, 2))
    flags = np.empty((H, I, J), dtype=bool)
    if tracker is not None:
        tracker.reset(initial, I)
    for k in range(H):
        est = tracker.positions() if tracker is not None else None
        world = step_world(world, est)
        truth[k], poses[k] = world.targets, world.agents
        obs[k], flags[k] = sense(world)
        if tracker is not None:
            tracker.step([AgentPose(*a) for a in poses[k]], obs[k])
    return Trajectory(initial, initial_poses, truth, poses, obs, flags, world.faulty)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` split off ``seed``."""
    return np.random.default_rng([seed, index])


# --- dataset file -----------------------------------------------------------

DATASET_MAGIC = "# lof-dataset v1"


def dataset_columns(I: int, J: int) -> list[str]:
    cols = ["traj", "t"]
    cols += [f"x{j}_{c}" for j in range(J) for c in ("p1", "p2", "v1", "v2")]
    cols += [f"a{i}_{c}" for i in range(I) for c in ("p1", "p2", "th")]
    cols += [f"y{i}_{j}_{c}" for i in range(I) for j in range(J) for c in ("r", "phi")]
    cols += [f"d{i}_{j}" for i in range(I) for j in range(J)]
    return cols


def _fmt(v) -> str:
    return "NA" if np.isnan(v) else repr(float(v))


def write_dataset(path, trajectories: list[Trajectory], meta: dict | None = None) -> None:
    I, J = trajectories[0].num_agents, trajectories[0].num_targets
    lines = [DATASET_MAGIC]
    for k, v in (meta or {}).items():
        lines.append(f"# {k} = {v}")
    lines.append(",".join(dataset_columns(I, J)))
    for n, tr in enumerate(trajectories):
        empty_obs = np.full((I, J, 2), np.nan)
        rows = [(0, tr.initial, tr.initial_poses, empty_obs, np.zeros((I, J), dtype=bool))]
        rows += [(k + 1, tr.truth[k], tr.poses[k], tr.obs[k], tr.disturbed[k]) for k in range(tr.horizon)]
        for t, x, a, y, d in rows:
            fields = [str(n), str(t)]
            fields += [_fmt(v) for v in x.ravel()]
            fields += [_fmt(v) for v in a.ravel()]
            fields += [_fmt(v) for v in y.ravel()]
            fields += ["1" if f else "0" for f in d.ravel()]
            lines.append(",".join(fields))
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write dataset {os.fspath(path)!r}: {exc}") from exc


def read_dataset(path) -> tuple[list[Trajectory], dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read dataset {os.fspath(path)!r}: {exc}") from exc
    if not lines or lines[0] != DATASET_MAGIC:
        raise ValueError(f"{os.fspath(path)!r} is not a dataset file")
    meta = {}
    k = 1
    while lines[k].startswith("#"):
        key, _, value = lines[k][1:].partition("=")
        meta[key.strip()] = value.strip()
        k += 1
    cols = lines[k].split(",")
    I = 1 + max(int(c[1:].split("_")[0]) for c in cols if c.startswith("a"))
    J = 1 + max(int(c[1:].split("_")[0]) for c in cols if c.startswith("x"))
    groups: dict[int, list] = {}
    for line in lines[k + 1 :]:
        f = line.split(",")
        groups.setdefault(int(f[0]), []).append(f)
    out = []
    for n in sorted(groups):
        rows = sorted(groups[n], key=lambda f: int(f[1]))
        vals = np.array([[np.nan if v == "NA" else float(v) for v in f[2 : 2 + 4 * J + 3 * I + 2 * I * J]] for f in rows])
        flags = np.array([[v == "1" for v in f[2 + 4 * J + 3 * I + 2 * I * J :]] for f in rows])
        x = vals[:, : 4 * J].reshape(-1, J, 4)
        a = vals[:, 4 * J : 4 * J + 3 * I].reshape(-1, I, 3)
        y = vals[:, 4 * J + 3 * I :].reshape(-1, I, J, 2)
        d = flags.reshape(-1, I, J)
        out.append(Trajectory(x[0], a[0], x[1:], a[1:], y[1:], d[1:]))
    return out, meta


def world_meta(cfg: WorldConfig) -> dict:
    meta = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, DisturbancePattern):
            for g in dataclasses.fields(v):
                meta[f"disturbance.{g.name}"] = getattr(v, g.name)
        else:
            meta[f.name] = v
    return meta


def config_hash(items: dict) -> str:
    text = "\n".join(f"{k}={items[k]}" for k in sorted(items))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def generate_dataset(cfg: WorldConfig, n_trajectories: int, seed: int, path=None, meta: dict | None = None):
    """Simulate ``n_trajectories`` independent episodes; optionally write them to ``path``."""
    if n_trajectories < 1:
        raise ValueError("need at least one trajectory")
    trajs = [rollout(cfg, trajectory_rng(seed, k)) for k in range(n_trajectories)]
    if path is not None:
        info = dict(meta) if meta is not None else world_meta(cfg)
        info.setdefault("config_hash", config_hash(info))
        info["seed"] = seed
        info["n_trajectories"] = n_trajectories
        write_dataset(path, trajs, info)
    return trajs
