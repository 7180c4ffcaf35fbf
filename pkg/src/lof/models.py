"""Target dynamics and range-bearing sensing.

Ground truth and the estimators may disagree: the truth rotates the
position/velocity coupling by ``alpha`` and offsets the bearing by ``beta``,
while estimators are normally handed the nominal (unrotated) models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry

MISSING = None  # an empty observation sample


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(a, dtype=np.float64), 2.0 * math.pi)


def rotation(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s], [s, c]])


def evolution_matrix(alpha: float, dt: float) -> np.ndarray:
    """[[I, dt R_alpha], [0, I]] for the 4-state (x1, x2, v1, v2) target."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = np.eye(4)
    A[:2, 2:] = dt * rotation(alpha)
    return A


def process_noise(dt: float) -> np.ndarray:
    I2 = np.eye(2)
    return np.block([[dt**3 / 3 * I2, dt**2 / 2 * I2], [dt**2 / 2 * I2, dt * I2]])


@dataclass(frozen=True)
class EvolutionModel:
    alpha: float = 0.0
    dt: float = 0.5
    noise_scale: float = 1.0

    @property
    def A(self) -> np.ndarray:
        return evolution_matrix(self.alpha, self.dt)

    @property
    def Q(self) -> np.ndarray:
        return self.noise_scale * process_noise(self.dt)


@dataclass(frozen=True)
class LinearEvolution:
    """Arbitrary linear-Gaussian dynamics, mostly for oracle tests."""

    A: np.ndarray
    Q: np.ndarray


def step_truth(x, model, rng: np.random.Generator | None) -> np.ndarray:
    """A x + u, u ~ N(0, Q). ``rng=None`` or a zero Q gives the noiseless step."""
    x = np.asarray(x, dtype=np.float64)
    out = model.A @ x
    Q = model.Q
    if rng is not None and np.any(Q):
        out = out + np.linalg.cholesky(Q) @ rng.standard_normal(x.size)
    return out


@dataclass(frozen=True)
class AgentPose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class SensorModel:
    """Range-bearing sensor with bearing offset ``beta`` (degrees).

    Noise covariance is ``rho * diag(sigma_r^2, sigma_b^2)``.
    """

    beta: float = 0.0
    rho: float = 1.0
    sigma_r: float = 0.2
    sigma_b: float = 0.01
    fov: float = 100.0
    max_range: float = 10.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if not 0 < self.fov <= 360:
            raise ValueError("fov must lie in (0, 360]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    @property
    def R(self) -> np.ndarray:
        return self.rho * np.diag([self.sigma_r**2, self.sigma_b**2])

    def measure(self, pose: AgentPose, x) -> np.ndarray:
        """Noise-free h(a, x) = (range, bearing) including the ``beta`` offset."""
        d1, d2 = x[0] - pose.x, x[1] - pose.y
        r = math.hypot(d1, d2)
        phi = math.atan2(d2, d1) - pose.heading + math.radians(self.beta)
        return np.array([r, float(wrap_angle(phi))])

    def jacobian(self, pose: AgentPose, x) -> np.ndarray:
        return observation_jacobian(pose, x)

    @staticmethod
    def residual(y, y_pred) -> np.ndarray:
        d = np.asarray(y, dtype=np.float64) - y_pred
        d[1] = wrap_angle(d[1])
        return d

    def visible(self, pose: AgentPose, x) -> bool:
        d1, d2 = x[0] - pose.x, x[1] - pose.y
        if math.hypot(d1, d2) > self.max_range:
            return False
        if self.fov >= 360:
            return True
        off = wrap_angle(math.atan2(d2, d1) - pose.heading)
        return abs(float(off)) <= math.radians(self.fov) / 2


@dataclass(frozen=True)
class LinearSensor:
    """y = H x + v with v ~ N(0, R); the same interface as ``SensorModel``."""

    H: np.ndarray
    R: np.ndarray = field(default_factory=lambda: np.eye(1))

    def measure(self, pose, x) -> np.ndarray:
        return np.atleast_2d(self.H) @ np.asarray(x, dtype=np.float64)

    def jacobian(self, pose, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.H, dtype=np.float64))

    @staticmethod
    def residual(y, y_pred) -> np.ndarray:
        return np.atleast_1d(np.asarray(y, dtype=np.float64)) - y_pred


def observe(pose: AgentPose, x, sensor: SensorModel, rng: np.random.Generator | None):
    """Noisy range-bearing observation, or ``MISSING`` outside range or field of view."""
    if not sensor.visible(pose, x):
        return MISSING
    y = sensor.measure(pose, x)
    if rng is not None and sensor.rho > 0:
        std = math.sqrt(sensor.rho) * np.array([sensor.sigma_r, sensor.sigma_b])
        y = y + std * rng.standard_normal(2)
        y[1] = wrap_angle(y[1])
    return y


def observation_jacobian(pose: AgentPose, x_pred) -> np.ndarray:
    d1, d2 = x_pred[0] - pose.x, x_pred[1] - pose.y
    r2 = d1 * d1 + d2 * d2
    r = math.sqrt(r2)
    if r <= 1e-6:
        raise DegenerateGeometry(f"target estimate within {r:.2e} m of agent")
    return np.array([[d1 / r, d2 / r, 0.0, 0.0], [-d2 / r2, d1 / r2, 0.0, 0.0]])
