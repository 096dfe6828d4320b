"""Exponential (risk-sensitive) transform and the return dynamics it implies.

If ``h(R) = beta * exp(beta * R)`` has Brownian increments with drift
``mu`` and volatility ``sigma``, the return itself obeys

    dR = (mu / (beta**2 e^{beta R}) - sigma**2 / (2 beta**3 e^{2 beta R})) dt
         + sigma / (beta**2 e^{beta R}) dW,

a reducible SDE with closed-form solution

    R_t = (1/beta) ln|sigma/beta| + (1/beta) ln|mu t / sigma + W_t + beta/sigma|.

This module evaluates both and integrates the SDE with Euler-Maruyama on
a stored Brownian path so the two can be compared pathwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .envs import stream

__all__ = [
    "RiskParams",
    "SdePath",
    "RangeError",
    "exp_transform",
    "drift_diffusion",
    "ell",
    "ell_inverse",
    "closed_form_return",
    "euler_maruyama",
    "brownian_path",
    "strong_error_ladder",
]

# exp overflows just above 709.78
_MAX_EXP = 709.0


class RangeError(OverflowError):
    """An exponential left the double-precision range."""


@dataclass(frozen=True)
class RiskParams:
    beta: float
    mu: float = 0.05
    sigma: float = 0.2

    def __post_init__(self):
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def coefficient_of_variation(self) -> float:
        return self.sigma / self.mu


def _checked_exp(x, what="exponent"):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > _MAX_EXP):
        raise RangeError(f"{what} {float(np.max(np.abs(x))):.4g} is outside the double range")
    return np.exp(x)


def exp_transform(R, beta: float):
    """``beta * exp(beta * R)``; raises :class:`RangeError` instead of saturating."""
    if beta == 0:
        raise ValueError("beta must be nonzero")
    out = beta * _checked_exp(beta * np.asarray(R, dtype=float), "beta*R")
    return float(out) if np.ndim(out) == 0 else out


def drift_diffusion(R, params: RiskParams):
    b, mu, s = params.beta, params.mu, params.sigma
    e1 = _checked_exp(-b * np.asarray(R, dtype=float), "beta*R")
    e2 = _checked_exp(-2.0 * b * np.asarray(R, dtype=float), "2*beta*R")
    drift = mu * e1 / b**2 - 0.5 * s**2 * e2 / b**3
    diffusion = s * e1 / b**2
    if np.ndim(drift) == 0:
        return float(drift), float(diffusion)
    return drift, diffusion


def ell(R, params: RiskParams):
    """Antiderivative of ``1/diffusion``: ``(beta/sigma) exp(beta R)``."""
    out = params.beta / params.sigma * _checked_exp(params.beta * np.asarray(R, dtype=float), "beta*R")
    return float(out) if np.ndim(out) == 0 else out


def ell_inverse(y, params: RiskParams):
    """Inverse of :func:`ell` on its branch, where ``y * beta / sigma > 0``."""
    b, s = params.beta, params.sigma
    y = np.asarray(y, dtype=float)
    if np.any(y * b / s <= 0):
        raise ValueError("ell_inverse argument has the wrong sign for this beta")
    out = (math.log(abs(s / b)) + np.log(np.abs(y))) / b
    return float(out) if out.ndim == 0 else out


def closed_form_return(t, W_t, params: RiskParams):
    """Closed-form return at time ``t`` given the Brownian value ``W_t``."""
    b, mu, s = params.beta, params.mu, params.sigma
    arg = mu * np.asarray(t, dtype=float) / s + np.asarray(W_t, dtype=float) + b / s
    if np.any(arg == 0):
        raise ZeroDivisionError("closed-form return is singular: log argument is zero")
    out = (math.log(abs(s / b)) + np.log(np.abs(arg))) / b
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SdePath:
    times: np.ndarray
    brownian: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.brownian) == len(self.values)):
            raise ValueError("times, brownian and values must have equal length")

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "W", "R"])
            for row in zip(self.times, self.brownian, self.values):
                w.writerow([repr(float(v)) for v in row])
        return path

    @classmethod
    def read_csv(cls, path) -> "SdePath":
        a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(a[:, 0], a[:, 1], a[:, 2])


def brownian_path(n_steps: int, dt: float, seed: int) -> np.ndarray:
    """``W`` at ``0, dt, ..., n_steps*dt`` with ``W[0] = 0``."""
    dW = stream(seed, 0).standard_normal(n_steps) * math.sqrt(dt)
    return np.concatenate(([0.0], np.cumsum(dW)))


def euler_maruyama(
    params: RiskParams,
    R0: float,
    dt: float,
    n_steps: int,
    seed: int | None = None,
    brownian: np.ndarray | None = None,
    noise: bool = True,
) -> SdePath:
    """Integrate the return SDE with Euler-Maruyama.

    The Brownian path is drawn from ``seed`` unless given explicitly, and is
    stored on the result.  ``noise=False`` zeroes the diffusion term, which
    reduces the scheme to explicit Euler on the drift ODE.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if brownian is None:
        if seed is None:
            raise ValueError("need a seed or a Brownian path")
        brownian = brownian_path(n_steps, dt, seed)
    W = np.asarray(brownian, dtype=float)
    if W.size != n_steps + 1 or W[0] != 0.0:
        raise ValueError("Brownian path must have n_steps+1 points starting at 0")
    dW = np.diff(W)
    R = np.empty(n_steps + 1)
    R[0] = R0
    for k in range(n_steps):
        try:
            a, g = drift_diffusion(R[k], params)
        except RangeError as exc:
            raise RangeError(f"step {k}: {exc}") from exc
        R[k + 1] = R[k] + a * dt + (g * dW[k] if noise else 0.0)
    return SdePath(np.arange(n_steps + 1) * dt, W, R)


def _em_vectorised(params, R0, dt, dW):
    """Euler-Maruyama over a batch of paths, ``dW`` of shape (paths, steps)."""
    R = np.full(dW.shape[0], float(R0))
    out = np.empty((dW.shape[0], dW.shape[1] + 1))
    out[:, 0] = R
    for k in range(dW.shape[1]):
        a, g = drift_diffusion(R, params)
        R = R + a * dt + g * dW[:, k]
        out[:, k + 1] = R
    return out


def strong_error_ladder(
    params: RiskParams,
    dts=(2.0**-8, 2.0**-10, 2.0**-12, 2.0**-14),
    t_end: float = 1.0,
    n_seeds: int = 100,
    seed: int = 0,
) -> dict:
    """Mean pathwise max error of Euler-Maruyama against the closed form.

    One Brownian path per seed is drawn at the finest step and coarsened by
    summation, so every ``dt`` sees the same noise.  Returns the ``dts``, the
    mean errors, their standard errors and the successive error ratios.
    """
    dts = sorted(dts, reverse=True)
    fine = min(dts)
    n_fine = int(round(t_end / fine))
    R0 = closed_form_return(0.0, 0.0, params)
    dW_fine = np.vstack([stream(seed, i).standard_normal(n_fine) for i in range(n_seeds)]) * math.sqrt(fine)
    errors = []
    for dt in dts:
        m = int(round(dt / fine))
        dW = dW_fine.reshape(n_seeds, -1, m).sum(axis=2)
        W = np.concatenate((np.zeros((n_seeds, 1)), np.cumsum(dW, axis=1)), axis=1)
        t = np.arange(W.shape[1]) * dt
        exact = closed_form_return(t[None, :], W, params)
        approx = _em_vectorised(params, R0, dt, dW)
        errors.append(np.max(np.abs(approx - exact), axis=1))
    errors = np.array(errors)
    mean = errors.mean(axis=1)
    se = errors.std(axis=1, ddof=1) / math.sqrt(n_seeds)
    return {
        "params": {"beta": params.beta, "mu": params.mu, "sigma": params.sigma},
        "dts": [float(d) for d in dts],
        "mean_error": mean.tolist(),
        "standard_error": se.tolist(),
        "ratios": (mean[:-1] / mean[1:]).tolist(),
        "n_seeds": n_seeds,
    }
