"""Ergodicity transformations for reinforcement learning in non-ergodic environments."""

__version__ = "0.1.0"

from .envs import CoinTossConfig, GbmConfig, Trajectory, rollout_coin_toss, rollout_ensemble, simulate_gbm  # noqa: E402
from .transform import ErgodicityTransform, learn_transform  # noqa: E402

__all__ = [
    "__version__",
    "CoinTossConfig",
    "GbmConfig",
    "Trajectory",
    "rollout_coin_toss",
    "rollout_ensemble",
    "simulate_gbm",
    "ErgodicityTransform",
    "learn_transform",
]
