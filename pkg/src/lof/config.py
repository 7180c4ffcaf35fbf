"""Flat ``section.key = value`` run configuration.

Every key has a default; unknown keys and unparsable values raise
``ConfigError`` naming the key. ``LOF_SEED`` in the environment overrides
``run.seed``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .env import DisturbancePattern, WorldConfig, config_hash
from .errors import ConfigError
from .fusion import FusionConfig
from .training import TrainConfig


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> (default, parser, help)
SCHEMA: dict[str, tuple] = {
    "run.seed": (0, int, "master seed for simulation and training"),
    "env.horizon": (40, int, "steps per episode"),
    "env.dt": (0.5, float, "time interval [s]"),
    "env.map_size": (30.0, float, "side of the square map [m]"),
    "target.num": (2, int, "number of targets"),
    "target.max_speed": (2.0, float, "target speed cap [m/s]"),
    "agent.num": (4, int, "number of agents"),
    "agent.max_speed": (2.0, float, "agent speed [m/s]"),
    "agent.fov": (100.0, float, "field of view [deg]"),
    "agent.max_range": (10.0, float, "sensing range [m]"),
    "agent.policy": ("random_waypoint", str, "random_waypoint | pursuit"),
    "agent.standoff": (3.0, float, "pursuit stopping distance [m]"),
    "model.alpha": (20.0, float, "rotation of the true evolution model [deg]"),
    "model.beta": (10.0, float, "bearing offset of the true sensor [deg]"),
    "model.rho": (1.0, float, "observation noise scale"),
    "model.sigma_r": (0.2, float, "range noise std [m]"),
    "model.sigma_b": (0.01, float, "bearing noise std [rad]"),
    "model.swap": (False, _bool, "give the rotated models to the estimators instead of the world"),
    "decay.gamma": (0.001, float, "learning rate of the decay factor"),
    "decay.tau_init": (0.0, float, "initial pre-sigmoid decay accumulator"),
    "fusion.temperature": (100.0, float, "Soft Medoid temperature T"),
    "fusion.jsd": ("moment_matched", str, "moment_matched | monte_carlo"),
    "fusion.jsd_samples": (1000, int, "Monte Carlo samples per divergence"),
    "fusion.bci_rule": ("inverse_trace", str, "covariance-intersection weights: inverse_trace | uniform"),
    "disturbance.kind": ("default", str, "none | default | random | strong"),
    "disturbance.onset": (20, int, "first disturbed step"),
    "disturbance.bias_range": (1.0, float, "range bias [m]"),
    "disturbance.bias_bearing": (0.1, float, "bearing bias [rad]"),
    "disturbance.prob": (0.25, float, "per-step probability for the random pattern"),
    "disturbance.strength": (2.0, float, "bias multiplier for the strong pattern"),
    "train.dataset_size": (1300, int, "trajectories generated for training"),
    "train.iterations": (500, int, "Adam iterations"),
    "train.batch_size": (16, int, "trajectories per batch"),
    "train.lr": (0.003, float, "Adam learning rate"),
    "train.truncation": ("step", str, "step (full is not implemented)"),
    "train.hidden": (32, int, "MLP hidden width"),
    "eval.episodes": (100, int, "evaluation episodes per method"),
    "eval.mse_components": ("position", str, "position | full"),
    "eval.threshold": (0.646, float, "detection threshold [m]"),
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (d, _, _) in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, raw) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        parser = SCHEMA[key][1]
        try:
            self.values[key] = parser(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", key=key) from exc

    def update(self, items) -> "RunConfig":
        for k, v in dict(items).items():
            self.set(k, v)
        return self

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cfg = cls()
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"line {n}: expected 'key = value'", key=line)
            cfg.set(key.strip(), value.strip())
        return cfg

    @classmethod
    def load(cls, path=None, overrides=None, environ=None) -> "RunConfig":
        """Defaults, then the file at ``path``, then ``overrides``, then ``LOF_SEED``."""
        cfg = cls()
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                cfg = cls.parse(fh.read())
        cfg.update(overrides or {})
        env = os.environ if environ is None else environ
        if env.get("LOF_SEED"):
            cfg.set("run.seed", env["LOF_SEED"])
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.world()
            self.fusion()
            self.train()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self["eval.mse_components"] not in ("position", "full"):
            raise ConfigError("eval.mse_components must be position or full", key="eval.mse_components")
        if self["fusion.jsd"] not in ("moment_matched", "monte_carlo"):
            raise ConfigError("fusion.jsd must be moment_matched or monte_carlo", key="fusion.jsd")
        for k in ("train.dataset_size", "eval.episodes", "fusion.jsd_samples"):
            if self[k] < 1:
                raise ConfigError(f"{k} must be positive", key=k)
        if self["eval.threshold"] <= 0:
            raise ConfigError("eval.threshold must be positive", key="eval.threshold")

    def text(self) -> str:
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in SCHEMA)

    def hash(self) -> str:
        return config_hash({k: _fmt(v) for k, v in self.values.items()})

    # -- views ---------------------------------------------------------------

    def world(self) -> WorldConfig:
        v = self.values
        pattern = DisturbancePattern(v["disturbance.kind"], v["disturbance.onset"],
                                     (v["disturbance.bias_range"], v["disturbance.bias_bearing"]),
                                     v["disturbance.prob"], v["disturbance.strength"])
        return WorldConfig(
            map_size=v["env.map_size"], horizon=v["env.horizon"], dt=v["env.dt"],
            num_agents=v["agent.num"], num_targets=v["target.num"],
            target_max_speed=v["target.max_speed"], agent_max_speed=v["agent.max_speed"],
            alpha=v["model.alpha"], beta=v["model.beta"], rho=v["model.rho"],
            sigma_r=v["model.sigma_r"], sigma_b=v["model.sigma_b"], fov=v["agent.fov"],
            max_range=v["agent.max_range"], policy=v["agent.policy"], standoff=v["agent.standoff"],
            swap_models=v["model.swap"], disturbance=pattern, seed=v["run.seed"],
        )

    def fusion(self) -> FusionConfig:
        v = self.values
        return FusionConfig(temperature=v["fusion.temperature"], gamma=v["decay.gamma"],
                            tau_init=v["decay.tau_init"], jsd=v["fusion.jsd"],
                            jsd_samples=v["fusion.jsd_samples"], jsd_seed=v["run.seed"],
                            bci_rule=v["fusion.bci_rule"])

    def train(self, dataset=None) -> TrainConfig:
        v = self.values
        return TrainConfig(iterations=v["train.iterations"], batch_size=v["train.batch_size"],
                           lr=v["train.lr"], dataset=None if dataset is None else os.fspath(dataset),
                           seed=v["run.seed"], truncation=v["train.truncation"], hidden=v["train.hidden"])


def describe() -> str:
    """One line per key with its default, for ``--help``."""
    width = max(len(k) for k in SCHEMA)
    return "\n".join(f"  {k:<{width}} = {_fmt(d):<16} {h}" for k, (d, _, h) in SCHEMA.items())
