"""Learned ergodicity transformations.

A transformation ``h`` is learned from observed return trajectories as a
variance-stabilising map

    h(x) = integral from u_0 to x of du / sqrt(v(u)),

where ``v(u)`` is proxied by the conditional second moment of the next
increment, ``E[(R[k+1] - R[k])**2 | R[k] = u]``.  Its logarithm is
estimated by LOESS on the scatter of ``(R[k], log (R[k+1] - R[k])**2)``,
which keeps the estimate positive.  The second moment is proportional to
the conditional variance, and ``h`` is only defined up to an affine map,
so the proxy is enough.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .envs import Trajectory
from .loess import LoessFit, loess_fit

__all__ = [
    "IncrementSample",
    "ErgodicityTransform",
    "EmptySampleError",
    "build_increment_samples",
    "learn_transform",
    "transform_rewards",
    "log_transform",
    "affine_transform",
]

RELATIVE_EPSILON = 1e-12


class EmptySampleError(ValueError):
    """No usable increments: every step change is below the threshold."""


@dataclass(frozen=True)
class IncrementSample:
    """Scatter used for the second-moment fit, sorted by ``level``."""

    level: np.ndarray
    log_sq_increment: np.ndarray

    def __len__(self):
        return self.level.size


def _as_trajectories(trajectories) -> list:
    if isinstance(trajectories, Trajectory):
        return [trajectories]
    out = []
    for t in trajectories:
        out.append(t if isinstance(t, Trajectory) else Trajectory.from_returns(t))
    return out


def build_increment_samples(trajectories, epsilon: float | None = None) -> IncrementSample:
    """Pool ``(R[k], log (R[k+1]-R[k])**2)`` over one or more trajectories.

    Increments with ``|dR| <= epsilon`` are dropped, since the log of a
    zero increment is undefined.  ``epsilon=None`` uses a threshold
    relative to the level, ``1e-12 * |R[k]|``, so that processes decaying
    over hundreds of decades keep their small-level samples.
    """
    levels, targets = [], []
    for traj in _as_trajectories(trajectories):
        R = np.asarray(traj.returns, dtype=float)
        if R.size < 2:
            raise ValueError("each trajectory needs at least 2 steps")
        u = R[:-1]
        dR = np.diff(R)
        thresh = RELATIVE_EPSILON * np.abs(u) if epsilon is None else float(epsilon)
        keep = np.abs(dR) > thresh
        levels.append(u[keep])
        # 2*log|dR| rather than log(dR**2): the square underflows below ~1e-154
        targets.append(2.0 * np.log(np.abs(dR[keep])))
    u = np.concatenate(levels)
    y = np.concatenate(targets)
    if u.size == 0:
        raise EmptySampleError("all increments are below epsilon; supply a trajectory with varying returns")
    order = np.argsort(u, kind="stable")
    return IncrementSample(u[order], y[order])


@dataclass(frozen=True)
class ErgodicityTransform:
    """Tabulated monotone map with linear interpolation and extrapolation."""

    grid: np.ndarray
    values: np.ndarray
    slope_left: float
    slope_right: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.size < 2 or g.shape != v.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if not np.all(np.diff(g) > 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.diff(v) > 0):
            raise ValueError("values must be strictly increasing")
        if not (self.slope_left > 0 and self.slope_right > 0):
            raise ValueError("extrapolation slopes must be positive")

    def __call__(self, R):
        return apply(self, R)

    # -- persistence ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "grid": [float(x) for x in self.grid],
            "values": [float(x) for x in self.values],
            "slope_left": float(self.slope_left),
            "slope_right": float(self.slope_right),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErgodicityTransform":
        return cls(
            np.asarray(d["grid"], dtype=float),
            np.asarray(d["values"], dtype=float),
            float(d["slope_left"]),
            float(d["slope_right"]),
            dict(d.get("meta", {})),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> "ErgodicityTransform":
        return cls.from_dict(json.loads(Path(path).read_text()))


def apply(transform: ErgodicityTransform, R):
    """Evaluate ``h`` at ``R`` (scalar or array)."""
    x = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite return passed to transform")
    g, v = transform.grid, transform.values
    out = np.interp(x, g, v)
    out = np.where(x < g[0], v[0] + transform.slope_left * (x - g[0]), out)
    out = np.where(x > g[-1], v[-1] + transform.slope_right * (x - g[-1]), out)
    return float(out) if out.ndim == 0 else out


def _source_hash(trajectories) -> str:
    h = hashlib.sha256()
    for t in trajectories:
        h.update(np.ascontiguousarray(t.returns, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def learn_transform(
    trajectories,
    span: float = 0.3,
    robust_iterations: int = 2,
    grid_size: int = 256,
    epsilon: float | None = None,
    level_scale: str = "auto",
) -> ErgodicityTransform:
    """Learn a variance-stabilising transform from return trajectories.

    Samples from all trajectories are pooled.  ``log v(u)`` is fitted by
    LOESS, evaluated on a grid spanning the observed levels, and
    ``1/sqrt(v)`` is integrated with the trapezoid rule from the smallest
    observed level, where ``h`` is pinned to 0.

    ``level_scale`` picks the coordinate in which neighbourhoods and the
    grid are uniform: ``"linear"`` uses ``u`` itself, ``"log"`` uses
    ``log u`` (positive levels only) and suits multiplicative processes
    whose levels span many decades.  ``"auto"`` picks ``"log"`` when every
    level is positive.
    """
    trajs = _as_trajectories(trajectories)
    samples = build_increment_samples(trajs, epsilon)
    u, y = samples.level, samples.log_sq_increment
    if level_scale == "auto":
        level_scale = "log" if u[0] > 0 else "linear"
    if level_scale == "log":
        if u[0] <= 0:
            raise ValueError("log level scale needs strictly positive returns")
        coord = np.log(u)
    elif level_scale == "linear":
        coord = u
    else:
        raise ValueError(f"unknown level_scale {level_scale!r}")
    if coord[0] == coord[-1]:
        raise EmptySampleError("all samples sit at a single return level")

    fit = loess_fit(coord, y, span=span, robust_iterations=robust_iterations)
    cgrid = np.linspace(coord[0], coord[-1], int(grid_size))
    grid = np.exp(cgrid) if level_scale == "log" else cgrid
    # pin the ends exactly to the observed extremes
    grid[0], grid[-1] = u[0], u[-1]
    # log of the integrand 1/sqrt(v); trapezoid terms are formed in the log
    # domain because 1/sqrt(v) can reach 1e+230 where du is 1e-230
    log_f = -0.5 * fit(cgrid)
    if level_scale == "log":
        # integrate f(u) du = f(e^s) e^s ds in the uniform coordinate s
        log_g = log_f + cgrid
        log_ds = np.log(np.diff(cgrid))
        steps = 0.5 * (np.exp(log_g[:-1] + log_ds) + np.exp(log_g[1:] + log_ds))
    else:
        log_du = np.log(np.diff(grid))
        steps = 0.5 * (np.exp(log_f[:-1] + log_du) + np.exp(log_f[1:] + log_du))
    values = np.concatenate(([0.0], np.cumsum(steps)))
    if not np.all(np.diff(values) > 0):
        raise ValueError(
            "cumulative integral is not strictly increasing (increments lost to rounding); "
            f"levels span {u[0]:.3g}..{u[-1]:.3g}, try level_scale='log'"
        )
    with np.errstate(over="raise"):
        slopes = np.exp(log_f[[0, -1]])
    meta = {
        "span": span,
        "robust_iterations": robust_iterations,
        "epsilon": epsilon,
        "grid_size": int(grid_size),
        "level_scale": level_scale,
        "n_samples": int(u.size),
        "source_hash": _source_hash(trajs),
    }
    return ErgodicityTransform(grid, values, float(slopes[0]), float(slopes[1]), meta)


def transform_rewards(trajectory, transform) -> np.ndarray:
    """Transformed increments ``h(R[k]) - h(R[k-1])`` for ``k = 1..T``.

    ``transform`` may be an :class:`ErgodicityTransform` or any vectorised
    callable.
    """
    R = trajectory.returns if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    hR = np.asarray(transform(R), dtype=float)
    return np.diff(hR)


def log_transform(R):
    """The analytic ergodicity transformation of multiplicative dynamics."""
    return np.log(np.asarray(R, dtype=float))


def affine_transform(grid: Sequence[float], a: float = 1.0, b: float = 0.0) -> ErgodicityTransform:
    """``h(u) = a*u + b`` tabulated on ``grid``; mostly for tests."""
    g = np.asarray(grid, dtype=float)
    return ErgodicityTransform(g, a * g + b, a, a, {"kind": "affine"})


def tabulate(fn, grid: Sequence[float]) -> ErgodicityTransform:
    """Tabulate a strictly increasing callable, e.g. ``np.log``, on ``grid``."""
    g = np.asarray(grid, dtype=float)
    v = np.asarray(fn(g), dtype=float)
    dv = np.diff(v) / np.diff(g)
    return ErgodicityTransform(g, v, float(dv[0]), float(dv[-1]), {"kind": "tabulated"})
