"""Ergodicity statistics and brute-force oracles.

Estimators report sample counts and standard errors alongside point
values so that every threshold applied to them can be audited.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .envs import CoinTossConfig, Trajectory, ensemble_matrix, rollout_coin_toss, rollout_ensemble, stream

__all__ = [
    "GrowthStats",
    "ensemble_average",
    "time_average_growth",
    "growth_stats",
    "kelly_growth",
    "kelly_oracle",
    "increment_variance_by_bin",
    "proportionality_check",
    "coin_toss_sampler",
    "gbm_sampler",
    "sigmoid_utility_score",
    "ergodicity_witness",
]


def ensemble_average(ensemble: Sequence[Trajectory], t_k: int, field: str = "returns") -> float:
    """Mean of ``R(t_k)`` (or ``r(t_k)`` with ``field="rewards"``) across realizations."""
    if field == "returns":
        M = ensemble_matrix(ensemble)
    elif field == "rewards":
        rows = [t.rewards for t in ensemble]
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged ensemble")
        M = np.vstack(rows)
    else:
        raise ValueError(f"unknown field {field!r}")
    if not 0 <= t_k < M.shape[1]:
        raise IndexError(f"t_k={t_k} outside 0..{M.shape[1] - 1}")
    return float(M[:, t_k].mean())


def time_average_growth(trajectory) -> float:
    """Per-step log growth ``(ln R(T) - ln R(t_0)) / T`` along one path.

    Uses the log-domain record of a :class:`Trajectory` when it has one.
    """
    if isinstance(trajectory, Trajectory) and trajectory.log_returns is not None:
        logR = trajectory.log_returns
        return float((logR[-1] - logR[0]) / (logR.size - 1))
    R = trajectory.returns if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    if np.any(R <= 0):
        raise ValueError("time-average growth needs strictly positive returns")
    T = R.size - 1
    if T < 1:
        raise ValueError("need at least one step")
    return float((math.log(R[-1]) - math.log(R[0])) / T)


@dataclass
class GrowthStats:
    ensemble_mean_by_time: np.ndarray
    time_average_growth: np.ndarray
    final_mean: float
    final_median: float
    final_quantiles: dict
    n_trajectories: int

    def to_dict(self):
        d = asdict(self)
        d["ensemble_mean_by_time"] = self.ensemble_mean_by_time.tolist()
        d["time_average_growth"] = self.time_average_growth.tolist()
        return d


def growth_stats(ensemble: Sequence[Trajectory], quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> GrowthStats:
    M = ensemble_matrix(ensemble)
    final = M[:, -1]
    return GrowthStats(
        ensemble_mean_by_time=M.mean(axis=0),
        time_average_growth=np.array([time_average_growth(row) for row in M]),
        final_mean=float(final.mean()),
        final_median=float(np.median(final)),
        final_quantiles={str(q): float(np.quantile(final, q)) for q in quantiles},
        n_trajectories=M.shape[0],
    )


def kelly_growth(F, cfg: CoinTossConfig = CoinTossConfig()):
    """Expected per-step log growth of betting fraction ``F``."""
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore"):
        return cfg.p_heads * np.log1p(cfg.gain_frac * F) + (1 - cfg.p_heads) * np.log1p(-cfg.loss_frac * F)


def kelly_oracle(cfg: CoinTossConfig = CoinTossConfig(), resolution: int = 10_000):
    """Grid maximiser of the log growth over ``F`` in ``[0, 1]``.

    Returns ``(F*, g(F*))``.
    """
    if resolution < 100:
        raise ValueError("resolution must be at least 100")
    F = np.linspace(0.0, 1.0, int(resolution) + 1)
    g = kelly_growth(F, cfg)
    i = int(np.argmax(g))
    return float(F[i]), float(g[i])


def _log_variance(x: np.ndarray) -> float:
    if x.size < 2:
        return -math.inf
    scale = float(np.max(np.abs(x)))
    if scale == 0:
        return -math.inf
    v = (x / scale).var(ddof=1)
    return 2 * math.log(scale) + math.log(v) if v > 0 else -math.inf


def increment_variance_by_bin(trajectory, transform: Callable | None = None, n_bins: int = 10, min_count: int = 10) -> dict:
    """Variance of (transformed) increments grouped by quantile bins of the level.

    Bins with fewer than ``min_count`` increments are merged into their
    neighbour and the merge is reported.
    """
    R = trajectory.returns if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    u = R[:-1]
    if transform is None:
        inc = np.diff(R)
    else:
        inc = np.diff(np.asarray(transform(R), dtype=float))
    edges = np.quantile(u, np.linspace(0.0, 1.0, n_bins + 1))
    labels = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, n_bins - 1)
    groups = [np.flatnonzero(labels == b) for b in range(n_bins)]
    merged = 0
    i = 0
    while i < len(groups) and len(groups) > 1:
        if groups[i].size < min_count:
            j = i + 1 if i + 1 < len(groups) else i - 1
            groups[j] = np.sort(np.concatenate((groups[j], groups[i])))
            del groups[i]
            merged += 1
            i = 0
            continue
        i += 1
    var = np.array([inc[g].var(ddof=1) if g.size > 1 else 0.0 for g in groups])
    # log variance computed on rescaled increments, finite even when var underflows
    log_var = np.array([_log_variance(inc[g]) for g in groups])
    counts = np.array([g.size for g in groups])
    # standard error of a sample variance, normal approximation
    se = var * np.sqrt(2.0 / np.maximum(counts - 1, 1))
    lo = np.array([u[g].min() for g in groups])
    hi = np.array([u[g].max() for g in groups])
    vmin = var.min()
    return {
        "variance": var,
        "standard_error": se,
        "counts": counts,
        "level_low": lo,
        "level_high": hi,
        "ratio": float(var.max() / vmin) if vmin > 0 else math.inf,
        "log10_ratio": float((log_var.max() - log_var.min()) / math.log(10)) if log_var.max() > -math.inf else math.nan,
        "merged_bins": merged,
    }


def coin_toss_sampler(cfg: CoinTossConfig = CoinTossConfig(), F: float = 1.0):
    """Next-step increments of the coin toss started afresh from level ``u``."""

    def sample(u, n, rng):
        heads = rng.random(n) < cfg.p_heads
        return np.where(heads, cfg.gain_frac * F * u, -cfg.loss_frac * F * u)

    return sample


def gbm_sampler(drift: float = 0.05, volatility: float = 0.2, dt: float = 1e-3):
    """Next-step increments of the Euler GBM scheme from level ``u``."""

    def sample(u, n, rng):
        return u * (drift * dt + volatility * math.sqrt(dt) * rng.standard_normal(n))

    return sample


def proportionality_check(sampler, levels: Sequence[float], n_samples: int = 1_000_000, seed: int = 0) -> dict:
    """Conditional second moment over conditional variance at each level.

    ``sampler(u, n, rng)`` draws ``n`` next-step increments given the
    current level ``u``.  The process is regenerated from each level
    rather than filtered out of a trajectory, which would condition on the
    whole path.
    """
    rows = []
    for i, u in enumerate(levels):
        d = np.asarray(sampler(float(u), int(n_samples), stream(seed, i)), dtype=float)
        m2 = float(np.mean(d * d))
        var = float(np.var(d, ddof=1))
        rows.append(
            {
                "level": float(u),
                "second_moment": m2,
                "second_moment_se": float(np.std(d * d, ddof=1) / math.sqrt(d.size)),
                "variance": var,
                "ratio": m2 / var if var > 0 else math.inf,
                "n": int(d.size),
            }
        )
    ratios = np.array([r["ratio"] for r in rows])
    return {"rows": rows, "ratio_spread": float(ratios.max() / ratios.min())}


def sigmoid_utility_score(curve: Sequence[float], m0: float, g0: float) -> float:
    """Logistic-weighted sum of a learning curve; episodes are numbered from 1."""
    if not g0 > 0:
        raise ValueError("g0 must be positive")
    R = np.asarray(curve, dtype=float)
    if not np.all(np.isfinite(R)):
        raise ValueError("curve must be finite")
    u = np.arange(1, R.size + 1)
    return float(np.dot(R, expit(g0 * (u - m0))))


def ergodicity_witness(cfg: CoinTossConfig = CoinTossConfig(), n_ensemble: int = 100_000, t_ensemble: int = 10,
                       t_time: int = 100_000, F: float = 1.0, seed: int = 0) -> dict:
    """Ensemble mean versus time-average growth for the coin toss.

    The ensemble side reports the mean return after ``t_ensemble`` steps
    over ``n_ensemble`` paths; the time side reports the per-step log
    growth of one path of ``t_time`` steps.
    """
    ens = rollout_ensemble(replace(cfg, horizon=t_ensemble), F, n_ensemble, seed)
    final = np.array([t.final_return for t in ens])
    long_path = rollout_coin_toss(replace(cfg, horizon=t_time), F, seed + 1)
    g = time_average_growth(long_path)
    p = cfg.p_heads
    log_up, log_down = math.log1p(cfg.gain_frac * F), math.log1p(-cfg.loss_frac * F)
    g_se = math.sqrt(p * (1 - p)) * abs(log_up - log_down) / math.sqrt(t_time)
    expected_factor = 1 + p * cfg.gain_frac * F - (1 - p) * cfg.loss_frac * F
    return {
        "ensemble_mean": float(final.mean()),
        "ensemble_mean_se": float(final.std(ddof=1) / math.sqrt(final.size)),
        "ensemble_mean_expected": cfg.initial_return * expected_factor**t_ensemble,
        "time_average_growth": g,
        "time_average_growth_se": g_se,
        "time_average_growth_expected": p * log_up + (1 - p) * log_down,
        "n_ensemble": n_ensemble,
        "t_ensemble": t_ensemble,
        "t_time": t_time,
    }
