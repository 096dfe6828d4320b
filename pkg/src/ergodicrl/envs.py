"""Non-ergodic reference processes: the multiplicative coin toss and GBM.

The binary game (play or don't) is the ``F in {0, 1}`` restriction of the
fractional game, so both go through :func:`coin_toss_step`.

Every trajectory row ``k`` holds ``(step, reward, return)`` with
``return[k] == return[k-1] + reward[k]``.  Row 0 carries the initial return
as both reward and return.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np

__all__ = [
    "CoinTossConfig",
    "GbmConfig",
    "Trajectory",
    "CoinTossEnv",
    "stream",
    "coin_toss_step",
    "rollout_coin_toss",
    "rollout_ensemble",
    "simulate_gbm",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_ensemble_csv",
    "read_ensemble_csv",
]

Policy = Union[float, Callable[[float], float]]


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator keyed by ``(seed, index)``.

    Streams for different indices are decorrelated by ``SeedSequence``
    hashing, so ensemble members can be generated in any order or in
    parallel and still replay bit-for-bit.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True)
class CoinTossConfig:
    initial_return: float = 100.0
    gain_frac: float = 0.5
    loss_frac: float = 0.4
    p_heads: float = 0.5
    horizon: int = 1000

    def __post_init__(self):
        if not (self.initial_return > 0 and math.isfinite(self.initial_return)):
            raise ValueError(f"initial_return must be positive, got {self.initial_return}")
        if not 0.0 <= self.p_heads <= 1.0:
            raise ValueError(f"p_heads must be a probability, got {self.p_heads}")
        if not self.gain_frac > 0:
            raise ValueError(f"gain_frac must be positive, got {self.gain_frac}")
        if not 0.0 < self.loss_frac < 1.0:
            raise ValueError(f"loss_frac must lie in (0, 1), got {self.loss_frac}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")


@dataclass(frozen=True)
class GbmConfig:
    drift: float = 0.05
    volatility: float = 0.2
    initial_value: float = 100.0
    dt: float = 1e-3
    horizon: int = 100_000

    def __post_init__(self):
        if not self.initial_value > 0:
            raise ValueError(f"initial_value must be positive, got {self.initial_value}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.volatility < 0:
            raise ValueError(f"volatility must be nonnegative, got {self.volatility}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")


@dataclass(frozen=True)
class Trajectory:
    """Rewards and cumulative returns of one realization.

    ``steps`` runs ``0..T``; ``returns[0] == rewards[0]`` is the initial
    return.  Multiplicative rollouts also fill ``log_returns``, accumulated
    in the log domain, which stays exact after ``returns`` underflows
    (a fair coin toss at ``F=1`` passes 1e-308 after ~13,000 steps).
    """

    steps: np.ndarray
    rewards: np.ndarray
    returns: np.ndarray
    log_returns: np.ndarray | None = field(default=None, compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.steps)
        if len(self.rewards) != n or len(self.returns) != n:
            raise ValueError("steps, rewards and returns must have equal length")
        if n == 0:
            raise ValueError("empty trajectory")

    @classmethod
    def from_returns(cls, returns: Sequence[float], log_returns=None, **meta) -> "Trajectory":
        """Build from a return series; rewards are the exact differences.

        The subtraction is exact whenever consecutive returns are within a
        factor of two of each other (Sterbenz), which holds for every
        process generated in this package.
        """
        R = np.asarray(returns, dtype=float)
        if R.ndim != 1 or R.size == 0:
            raise ValueError("returns must be a non-empty 1-d sequence")
        r = np.empty_like(R)
        r[0] = R[0]
        r[1:] = np.diff(R)
        return cls(np.arange(R.size), r, R, log_returns, dict(meta))

    def __len__(self):
        return len(self.steps)

    @property
    def horizon(self) -> int:
        return len(self.steps) - 1

    @property
    def final_return(self) -> float:
        return float(self.returns[-1])

    def telescoping_error(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.max(np.abs(self.returns[1:] - self.returns[:-1] - self.rewards[1:])))


def coin_toss_step(R_prev: float, F: float, heads: bool, cfg: CoinTossConfig) -> float:
    """Reward for betting fraction ``F`` of the current return on one toss."""
    if not math.isfinite(R_prev):
        raise ValueError(f"non-finite return {R_prev}")
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"bet fraction must lie in [0, 1], got {F}")
    if heads:
        return cfg.gain_frac * F * R_prev
    return -cfg.loss_frac * F * R_prev


def _as_policy(policy: Policy) -> Callable[[float], float]:
    if callable(policy):
        return policy
    F = float(policy)
    return lambda R: F


def _rollout(cfg: CoinTossConfig, policy: Callable[[float], float], rng: np.random.Generator) -> Trajectory:
    T = int(cfg.horizon)
    heads = rng.random(T) < cfg.p_heads
    R = np.empty(T + 1)
    R[0] = cfg.initial_return
    log_factor = np.empty(T)
    for k in range(T):
        F = policy(R[k])
        R[k + 1] = R[k] + coin_toss_step(R[k], F, bool(heads[k]), cfg)
        log_factor[k] = math.log1p(cfg.gain_frac * F if heads[k] else -cfg.loss_frac * F)
    logR = math.log(cfg.initial_return) + np.concatenate(([0.0], np.cumsum(log_factor)))
    return Trajectory.from_returns(R, log_returns=logR)


def rollout_coin_toss(cfg: CoinTossConfig, policy: Policy, rng_seed: int) -> Trajectory:
    """One coin-toss trajectory of ``cfg.horizon`` steps.

    ``policy`` is a constant bet fraction or a callable mapping the current
    return to a fraction in ``[0, 1]``.  The toss outcomes are drawn up
    front from ``stream(rng_seed, 0)``.
    """
    return _rollout(cfg, _as_policy(policy), stream(rng_seed, 0))


def rollout_ensemble(cfg: CoinTossConfig, policy: Policy, n_trajectories: int, seed: int) -> list[Trajectory]:
    """``n_trajectories`` independent rollouts; member ``i`` uses ``stream(seed, i)``."""
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    pol = _as_policy(policy)
    if not callable(policy):
        return _constant_ensemble(cfg, float(policy), n_trajectories, seed)
    return [_rollout(cfg, pol, stream(seed, i)) for i in range(n_trajectories)]


def _constant_ensemble(cfg, F, n, seed):
    # Same draws as the per-trajectory path, vectorised over time.
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"bet fraction must lie in [0, 1], got {F}")
    T = int(cfg.horizon)
    up, down = cfg.gain_frac * F, -cfg.loss_frac * F
    out = []
    for i in range(n):
        heads = stream(seed, i).random(T) < cfg.p_heads
        frac = np.where(heads, up, down)
        R = np.empty(T + 1)
        R[0] = cfg.initial_return
        # Sequential on purpose: R[k+1] = R[k] + frac*R[k] in the same order
        # of operations as coin_toss_step.
        for k in range(T):
            R[k + 1] = R[k] + frac[k] * R[k]
        logR = math.log(cfg.initial_return) + np.concatenate(([0.0], np.cumsum(np.log1p(frac))))
        out.append(Trajectory.from_returns(R, log_returns=logR))
    return out


def ensemble_matrix(trajectories: Iterable[Trajectory]) -> np.ndarray:
    """Stack returns into an ``(n, T+1)`` array; ragged input is an error."""
    rows = [t.returns for t in trajectories]
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise ValueError(f"ragged ensemble, lengths {sorted(lengths)}")
    return np.vstack(rows)


class GbmStepError(RuntimeError):
    """Raised when the Euler scheme produces a nonpositive value."""


def simulate_gbm(cfg: GbmConfig, seed: int, exact: bool = False, index: int = 0) -> Trajectory:
    """One geometric Brownian motion path drawn from ``stream(seed, index)``.

    Default is the multiplicative Euler scheme
    ``X[k+1] = X[k] * (1 + drift*dt + vol*sqrt(dt)*z)``; ``exact=True``
    samples the log-normal transition instead (oracle use only).
    """
    T = int(cfg.horizon)
    z = stream(seed, index).standard_normal(T)
    if exact:
        logstep = (cfg.drift - 0.5 * cfg.volatility**2) * cfg.dt + cfg.volatility * math.sqrt(cfg.dt) * z
        X = cfg.initial_value * np.exp(np.concatenate(([0.0], np.cumsum(logstep))))
    else:
        factor = 1.0 + cfg.drift * cfg.dt + cfg.volatility * math.sqrt(cfg.dt) * z
        bad = np.flatnonzero(factor <= 0)
        if bad.size:
            raise GbmStepError(
                f"Euler step {bad[0]} gives a nonpositive value (factor {factor[bad[0]]:.3g}); reduce dt"
            )
        X = cfg.initial_value * np.concatenate(([1.0], np.cumprod(factor)))
    if not np.all(np.isfinite(X)):
        raise GbmStepError("GBM path overflowed; reduce horizon or dt")
    return Trajectory.from_returns(X)


class CoinTossEnv:
    """Fractional coin toss as a sequential environment for the agent.

    The observation is the log return relative to the start, divided by
    ``sqrt(k + 1)``, a scale that stays O(1) for a multiplicative random
    walk regardless of horizon.  The action is the bet fraction.
    """

    obs_dim = 1
    action_kind = "fraction"

    def __init__(self, cfg: CoinTossConfig = CoinTossConfig()):
        self.cfg = cfg
        self.R = cfg.initial_return
        self.k = 0
        self._rng = None

    def _obs(self):
        return np.array([math.log(self.R / self.cfg.initial_return) / math.sqrt(self.k + 1)])

    def reset(self, rng: np.random.Generator):
        self._rng = rng
        self.R = self.cfg.initial_return
        self.k = 0
        return self._obs()

    def step(self, F: float):
        heads = self._rng.random() < self.cfg.p_heads
        r = coin_toss_step(self.R, float(F), heads, self.cfg)
        self.R = self.R + r
        self.k += 1
        if not self.R > 0:
            # underflow after a long losing streak; nothing left to bet
            return np.zeros(1), r, True
        return self._obs(), r, False


# -- CSV -----------------------------------------------------------------

def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "reward", "return"])
        for k, r, R in zip(traj.steps, traj.rewards, traj.returns):
            w.writerow([int(k), repr(float(r)), repr(float(R))])
    return path


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    return Trajectory(
        np.array([int(r["step"]) for r in rows]),
        np.array([float(r["reward"]) for r in rows]),
        np.array([float(r["return"]) for r in rows]),
    )


def write_ensemble_csv(trajectories: Sequence[Trajectory], path) -> Path:
    """Long format with a leading ``traj_id`` column."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["traj_id", "step", "reward", "return"])
        for i, t in enumerate(trajectories):
            for k, r, R in zip(t.steps, t.rewards, t.returns):
                w.writerow([i, int(k), repr(float(r)), repr(float(R))])
    return path


def read_ensemble_csv(path) -> list[Trajectory]:
    groups: dict[int, list] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            groups.setdefault(int(row["traj_id"]), []).append(row)
    out = []
    for i in sorted(groups):
        rows = groups[i]
        out.append(
            Trajectory(
                np.array([int(r["step"]) for r in rows]),
                np.array([float(r["reward"]) for r in rows]),
                np.array([float(r["return"]) for r in rows]),
            )
        )
    return out
