"""Learnable weighted robust fusion of local Gaussian estimates for multi-agent tracking."""

__version__ = "0.1.0"

from .errors import LofError  # noqa: E402
from .gaussian import GaussianBelief  # noqa: E402
from .env import WorldConfig, DisturbancePattern, rollout, generate_dataset  # noqa: E402
from .fusion import FusionConfig, TsmState, mixture_moments, robust_fuse  # noqa: E402
from .weights import MlpParams  # noqa: E402
from .pipeline import LofTracker, BciTracker, SkfTracker  # noqa: E402
from .training import TrainConfig, smoothed, train  # noqa: E402
from .metrics import run_episode, evaluate  # noqa: E402

__all__ = [
    "LofError", "GaussianBelief", "WorldConfig", "DisturbancePattern", "rollout", "generate_dataset",
    "FusionConfig", "TsmState", "mixture_moments", "robust_fuse", "MlpParams", "LofTracker", "BciTracker", "SkfTracker",
    "TrainConfig", "smoothed", "train", "run_episode", "evaluate",
]
