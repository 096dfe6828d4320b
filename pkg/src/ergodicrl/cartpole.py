"""Classic cart-pole, written from the textbook equations of motion.

Constants and the explicit Euler update follow the standard
classic-control benchmark.  Reward is 1 for every step taken, including
the one that ends the episode.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = ["CartPoleParams", "CartPoleState", "CartPoleEnv", "reset", "step", "energy", "write_episode_summary_csv"]

LEFT, RIGHT = 0, 1


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_half_length: float = 0.5
    force_magnitude: float = 10.0
    dt: float = 0.02
    angle_threshold: float = 12 * 2 * math.pi / 360
    position_threshold: float = 2.4

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")

    def with_pole_scale(self, factor: float) -> "CartPoleParams":
        return replace(self, pole_half_length=self.pole_half_length * factor)


@dataclass(frozen=True)
class CartPoleState:
    cart_position: float = 0.0
    cart_velocity: float = 0.0
    pole_angle: float = 0.0
    pole_angular_velocity: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.cart_position, self.cart_velocity, self.pole_angle, self.pole_angular_velocity])

    def __neg__(self):
        return CartPoleState(*(-self.as_array()))


def reset(seed_or_rng) -> CartPoleState:
    """Each component uniform on ``[-0.05, 0.05]``."""
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    return CartPoleState(*rng.uniform(-0.05, 0.05, size=4))


def _accelerations(theta, theta_dot, force, p: CartPoleParams):
    total_mass = p.cart_mass + p.pole_mass
    polemass_length = p.pole_mass * p.pole_half_length
    cos, sin = math.cos(theta), math.sin(theta)
    temp = (force + polemass_length * theta_dot**2 * sin) / total_mass
    theta_acc = (p.gravity * sin - cos * temp) / (
        p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos**2 / total_mass)
    )
    x_acc = temp - polemass_length * theta_acc * cos / total_mass
    return x_acc, theta_acc


def step(state: CartPoleState, action: int, params: CartPoleParams = CartPoleParams(), force: float | None = None):
    """Advance one explicit Euler step.

    Returns ``(next_state, reward, terminated)``.  ``force`` overrides the
    push implied by ``action``; tests use it to switch the motor off.
    """
    s = state.as_array()
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite cart-pole state {state}")
    if force is None:
        if action not in (LEFT, RIGHT):
            raise ValueError(f"action must be 0 (left) or 1 (right), got {action}")
        force = params.force_magnitude if action == RIGHT else -params.force_magnitude
    x, x_dot, theta, theta_dot = s
    x_acc, theta_acc = _accelerations(theta, theta_dot, force, params)
    nxt = CartPoleState(
        x + params.dt * x_dot,
        x_dot + params.dt * x_acc,
        theta + params.dt * theta_dot,
        theta_dot + params.dt * theta_acc,
    )
    terminated = abs(nxt.cart_position) > params.position_threshold or abs(nxt.pole_angle) > params.angle_threshold
    return nxt, 1.0, bool(terminated)


def energy(state: CartPoleState, params: CartPoleParams = CartPoleParams()) -> float:
    """Total mechanical energy, pole modelled as a uniform rod of half-length ``l``."""
    m_c, m_p, l = params.cart_mass, params.pole_mass, params.pole_half_length
    x_dot, th, th_dot = state.cart_velocity, state.pole_angle, state.pole_angular_velocity
    # centre-of-mass velocity of the pole
    vx = x_dot + l * th_dot * math.cos(th)
    vy = -l * th_dot * math.sin(th)
    kinetic = 0.5 * m_c * x_dot**2 + 0.5 * m_p * (vx**2 + vy**2) + 0.5 * (m_p * (2 * l) ** 2 / 12) * th_dot**2
    potential = m_p * params.gravity * l * math.cos(th)
    return kinetic + potential


class CartPoleEnv:
    """Sequential wrapper used by the agent; the observation is the raw state."""

    obs_dim = 4
    n_actions = 2
    action_kind = "discrete"

    def __init__(self, params: CartPoleParams = CartPoleParams()):
        self.params = params
        self.state = CartPoleState()

    def reset(self, rng: np.random.Generator):
        self.state = reset(rng)
        return self.state.as_array()

    def step(self, action: int):
        self.state, r, done = step(self.state, int(action), self.params)
        return self.state.as_array(), r, done


def write_episode_summary_csv(lengths, returns, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "length", "return"])
        for i, (n, R) in enumerate(zip(lengths, returns)):
            w.writerow([i, int(n), repr(float(R))])
    return path
