"""Monte Carlo policy gradient (REINFORCE) with pluggable return transforms.

The policy is a one-hidden-layer tanh network with either a softmax head
(discrete actions) or a Beta head (a fraction in ``[0, 1]``, as in the
fractional coin toss).  Gradients of the log-likelihood are derived by
hand; ``tests/test_agent.py`` checks them against finite differences.

Return transforms plug in at one of two places:

``target="return"``
    ``h`` maps the cumulative return ``R(t_k)`` and the agent learns from
    the increments ``h(R(t_k)) - h(R(t_{k-1}))``.
``target="return_to_go"``
    ``h`` is learned from, and applied to, the sequence of discounted
    returns-to-go ``G_k`` that REINFORCE weights its score terms with.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import betaln, digamma, expit, log_softmax

from .envs import Trajectory, stream
from .transform import EmptySampleError, ErgodicityTransform, learn_transform

__all__ = [
    "PolicyParams",
    "TrainConfig",
    "EpisodeBatch",
    "TrainResult",
    "init_policy",
    "policy_forward",
    "log_prob",
    "score_gradient",
    "sample_actions",
    "returns_to_go",
    "reinforce_update",
    "Adam",
    "train",
    "evaluate",
]

log = logging.getLogger(__name__)

ACTION_EPS = 1e-6


# -- policy ----------------------------------------------------------------

@dataclass
class PolicyParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    head: str = "softmax"

    NAMES = ("W1", "b1", "W2", "b2")

    @property
    def hidden(self) -> int:
        return self.b1.size

    @property
    def obs_dim(self) -> int:
        return self.W1.shape[1]

    def arrays(self):
        return [getattr(self, n) for n in self.NAMES]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, v) -> "PolicyParams":
        out, i = [], 0
        for a in self.arrays():
            out.append(np.asarray(v[i : i + a.size], dtype=float).reshape(a.shape))
            i += a.size
        return PolicyParams(*out, head=self.head)

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.arrays()), head=self.head)

    def to_dict(self, config: dict | None = None) -> dict:
        d = {
            "head": self.head,
            "shapes": {n: list(getattr(self, n).shape) for n in self.NAMES},
            "weights": {n: getattr(self, n).ravel().tolist() for n in self.NAMES},
        }
        if config is not None:
            d["config_hash"] = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyParams":
        arrs = [np.asarray(d["weights"][n], dtype=float).reshape(d["shapes"][n]) for n in cls.NAMES]
        return cls(*arrs, head=d["head"])

    def save(self, path, config: dict | None = None) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(config)))
        return path

    @classmethod
    def load(cls, path) -> "PolicyParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_policy(obs_dim: int, n_out: int, hidden: int, head: str, rng: np.random.Generator) -> PolicyParams:
    """Glorot-uniform hidden layer, near-zero output layer (near-uniform policy)."""
    if head not in ("softmax", "beta"):
        raise ValueError(f"unknown head {head!r}")
    if head == "beta" and n_out != 2:
        raise ValueError("beta head needs exactly two outputs")
    lim = math.sqrt(6.0 / (obs_dim + hidden))
    W1 = rng.uniform(-lim, lim, size=(hidden, obs_dim))
    W2 = rng.uniform(-1.0, 1.0, size=(n_out, hidden)) * 0.01
    return PolicyParams(W1, np.zeros(hidden), W2, np.zeros(n_out), head)


def _hidden(params, obs):
    X = np.atleast_2d(np.asarray(obs, dtype=float))
    Hd = np.tanh(X @ params.W1.T + params.b1)
    return X, Hd


def _beta_ab(out):
    # softplus(o) + 1 keeps the density unimodal or flat
    return np.logaddexp(0.0, out[:, 0]) + 1.0, np.logaddexp(0.0, out[:, 1]) + 1.0


def policy_forward(params: PolicyParams, observation):
    """Action distribution for one observation or a batch.

    Softmax head: probabilities, shape ``(n_actions,)`` or ``(N, n_actions)``.
    Beta head: ``(alpha, beta)`` arrays.
    """
    obs = np.asarray(observation, dtype=float)
    single = obs.ndim == 1
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite observation")
    _, Hd = _hidden(params, obs)
    out = Hd @ params.W2.T + params.b2
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite policy activations")
    if params.head == "softmax":
        p = np.exp(log_softmax(out, axis=1))
        return p[0] if single else p
    a, b = _beta_ab(out)
    return (a[0], b[0]) if single else (a, b)


def mean_action(params: PolicyParams, observation):
    """Expected action: the mean of the Beta head, or the argmax class."""
    if params.head == "beta":
        a, b = policy_forward(params, np.atleast_2d(observation))
        return a / (a + b)
    return np.argmax(policy_forward(params, np.atleast_2d(observation)), axis=1)


def sample_actions(params: PolicyParams, obs, rng: np.random.Generator, greedy: bool = False):
    """One action per row of ``obs``."""
    obs = np.atleast_2d(obs)
    if params.head == "softmax":
        p = policy_forward(params, obs)
        if greedy:
            return np.argmax(p, axis=1)
        u = rng.random(p.shape[0])
        return np.minimum((np.cumsum(p, axis=1) < u[:, None]).sum(axis=1), p.shape[1] - 1)
    a, b = policy_forward(params, obs)
    x = a / (a + b) if greedy else rng.beta(a, b)
    return np.clip(x, ACTION_EPS, 1.0 - ACTION_EPS)


def log_prob(params: PolicyParams, obs, actions) -> np.ndarray:
    X, Hd = _hidden(params, obs)
    out = Hd @ params.W2.T + params.b2
    if params.head == "softmax":
        actions = np.asarray(actions, dtype=int)
        return log_softmax(out, axis=1)[np.arange(actions.size), actions]
    x = np.clip(np.asarray(actions, dtype=float), ACTION_EPS, 1.0 - ACTION_EPS)
    a, b = _beta_ab(out)
    return (a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - betaln(a, b)


def score_gradient(params: PolicyParams, obs, actions, weights):
    """Value and gradient of ``sum_k weights[k] * log pi(a_k | s_k)``.

    Returns ``(value, [dW1, db1, dW2, db2])``.
    """
    w = np.asarray(weights, dtype=float)
    X, Hd = _hidden(params, obs)
    out = Hd @ params.W2.T + params.b2
    if params.head == "softmax":
        actions = np.asarray(actions, dtype=int)
        lsm = log_softmax(out, axis=1)
        rows = np.arange(actions.size)
        value = float(np.dot(w, lsm[rows, actions]))
        d_out = -np.exp(lsm)
        d_out[rows, actions] += 1.0
    else:
        x = np.clip(np.asarray(actions, dtype=float), ACTION_EPS, 1.0 - ACTION_EPS)
        a, b = _beta_ab(out)
        lx, l1x = np.log(x), np.log1p(-x)
        value = float(np.dot(w, (a - 1) * lx + (b - 1) * l1x - betaln(a, b)))
        psi_ab = digamma(a + b)
        d_a = lx - digamma(a) + psi_ab
        d_b = l1x - digamma(b) + psi_ab
        d_out = np.column_stack((d_a * expit(out[:, 0]), d_b * expit(out[:, 1])))
    d_out = d_out * w[:, None]
    dW2 = d_out.T @ Hd
    db2 = d_out.sum(axis=0)
    dz = (d_out @ params.W2) * (1.0 - Hd**2)
    dW1 = dz.T @ X
    db1 = dz.sum(axis=0)
    return value, [dW1, db1, dW2, db2]


# -- returns and batches -----------------------------------------------------

def returns_to_go(rewards, gamma: float) -> np.ndarray:
    """``G_k = r_k + gamma * G_{k+1}`` with ``G`` past the end equal to 0."""
    r = np.asarray(rewards, dtype=float)
    G = np.empty_like(r)
    acc = 0.0
    for k in range(r.size - 1, -1, -1):
        acc = r[k] + gamma * acc
        G[k] = acc
    return G


@dataclass
class EpisodeBatch:
    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    returns: np.ndarray
    transformed_rewards: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.actions)
        lengths = {len(self.observations), len(self.log_probs), len(self.rewards), len(self.returns), n}
        if self.transformed_rewards is not None:
            lengths.add(len(self.transformed_rewards))
        if len(lengths) != 1:
            raise ValueError(f"inconsistent batch lengths {sorted(lengths)}")

    def __len__(self):
        return len(self.actions)


# -- optimisation ---------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """REINFORCE settings.  Defaults are the cart-pole column of the
    published hyperparameter table."""

    discount: float = 0.99
    training_episodes: int = 1000
    test_episodes: int = 100
    train_episode_length: int = 100
    test_episode_length: int = 200
    epochs: int = 10
    learning_rate: float = 0.0007
    hidden: int = 16
    transform_mode: str = "none"  # none | static | per-episode
    transform_target: str = "return"  # return | return_to_go
    baseline: str = "mean"  # none | mean
    normalize_advantages: bool = False
    optimizer: str = "sgd"  # sgd | adam
    span: float = 0.3
    robust_iterations: int = 2
    grid_size: int = 256

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        if self.transform_mode not in ("none", "static", "per-episode"):
            raise ValueError(f"unknown transform_mode {self.transform_mode!r}")
        if self.transform_target not in ("return", "return_to_go"):
            raise ValueError(f"unknown transform_target {self.transform_target!r}")
        if self.baseline not in ("none", "mean"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        for name in ("training_episodes", "test_episodes", "train_episode_length", "test_episode_length", "epochs", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    """Adam ascent on a list of arrays."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, arrays, grads):
        if self.m is None:
            self.m = [np.zeros_like(g) for g in grads]
            self.v = [np.zeros_like(g) for g in grads]
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        out = []
        for p, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            out.append(p + self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


class NonFiniteGradient(FloatingPointError):
    pass


def advantages(batch: EpisodeBatch, cfg: TrainConfig) -> np.ndarray:
    A = np.asarray(batch.returns, dtype=float)
    if cfg.baseline == "mean":
        A = A - A.mean()
    if cfg.normalize_advantages:
        sd = A.std()
        A = A / sd if sd > 0 else np.zeros_like(A)
    return A


def reinforce_update(params: PolicyParams, batch: EpisodeBatch, cfg: TrainConfig, optimizer: Adam | None = None) -> PolicyParams:
    """``cfg.epochs`` ascent steps on ``sum_k log pi(a_k|s_k) * A_k``.

    Log-probabilities are recomputed from the current parameters on every
    pass.  Plain gradient ascent with ``cfg.learning_rate`` unless an
    :class:`Adam` instance is supplied.
    """
    A = advantages(batch, cfg)
    if not np.any(A):
        return params.copy()
    arrays = [a.copy() for a in params.arrays()]
    current = params.copy()
    for _ in range(cfg.epochs):
        _, grads = score_gradient(current, batch.observations, batch.actions, A)
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise NonFiniteGradient(
                "non-finite policy gradient; batch stats: "
                f"len={len(batch)} returns[min,max]=({np.min(batch.returns):.4g}, {np.max(batch.returns):.4g}) "
                f"adv[min,max]=({A.min():.4g}, {A.max():.4g}) rewards[min,max]=({np.min(batch.rewards):.4g}, {np.max(batch.rewards):.4g})"
            )
        if optimizer is None:
            arrays = [p + cfg.learning_rate * g for p, g in zip(arrays, grads)]
        else:
            arrays = optimizer.step(arrays, grads)
        current = PolicyParams(*arrays, head=params.head)
    return current


# -- rollouts -----------------------------------------------------------------

def _n_outputs(env) -> int:
    return 2 if env.action_kind == "fraction" else env.n_actions


def _head(env) -> str:
    return "beta" if env.action_kind == "fraction" else "softmax"


def _initial_return(env) -> float:
    cfg = getattr(env, "cfg", None)
    return float(cfg.initial_return) if cfg is not None else 0.0


def run_episode(params, env, length, rng, greedy=False):
    obs_list, act_list, rew_list = [], [], []
    obs = env.reset(rng)
    for _ in range(length):
        a = sample_actions(params, obs, rng, greedy)[0]
        nxt, r, done = env.step(a)
        obs_list.append(obs)
        act_list.append(a)
        rew_list.append(r)
        obs = nxt
        if done:
            break
    return np.array(obs_list), np.array(act_list), np.array(rew_list, dtype=float)


def _cumulative(env, rewards) -> Trajectory:
    R0 = _initial_return(env)
    R = R0 + np.concatenate(([0.0], np.cumsum(rewards)))
    return Trajectory.from_returns(R)


@dataclass
class TrainResult:
    params: PolicyParams
    curve: np.ndarray
    lengths: np.ndarray
    transform_failures: int = 0
    config: dict = field(default_factory=dict)

    def write_curve_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w") as fh:
            fh.write("episode,raw_return\n")
            for i, R in enumerate(self.curve):
                fh.write(f"{i},{float(R)!r}\n")
        return path


def _learn(cfg, series):
    return learn_transform(
        Trajectory.from_returns(series),
        span=cfg.span,
        robust_iterations=cfg.robust_iterations,
        grid_size=cfg.grid_size,
    )


def train(env, cfg: TrainConfig, transform_source=None, seed: int = 0) -> TrainResult:
    """Train a policy with REINFORCE, one episode per update.

    ``transform_source`` is the fixed transform for ``transform_mode="static"``
    (an :class:`ErgodicityTransform` or any vectorised callable); it is
    ignored otherwise.  In ``"per-episode"`` mode the transform is relearned
    from every collected episode; when that fails the previous transform is
    reused, or raw returns if there is none yet.

    The learning curve holds raw, untransformed episode returns.
    """
    if cfg.transform_mode == "static" and transform_source is None:
        raise ValueError("static transform mode needs a transform_source")
    params = init_policy(env.obs_dim, _n_outputs(env), cfg.hidden, _head(env), stream(seed, 0))
    rng = stream(seed, 1)
    opt = Adam(cfg.learning_rate) if cfg.optimizer == "adam" else None
    h = transform_source if cfg.transform_mode == "static" else None
    curve, lengths = [], []
    failures = 0
    for ep in range(cfg.training_episodes):
        obs, acts, rews = run_episode(params, env, cfg.train_episode_length, rng)
        curve.append(float(rews.sum()))
        lengths.append(len(rews))
        traj = _cumulative(env, rews)
        transformed = None

        if cfg.transform_mode != "none" and cfg.transform_target == "return":
            if cfg.transform_mode == "per-episode":
                try:
                    h = _learn(cfg, traj.returns)
                except (EmptySampleError, ValueError) as exc:
                    failures += 1
                    log.info("episode %d: transform refresh failed (%s); keeping previous", ep, exc)
            if h is not None:
                transformed = np.diff(np.asarray(h(traj.returns), dtype=float))
            G = returns_to_go(transformed if transformed is not None else rews, cfg.discount)
        else:
            G = returns_to_go(rews, cfg.discount)
            if cfg.transform_mode != "none":
                if cfg.transform_mode == "per-episode":
                    try:
                        h = _learn(cfg, G)
                    except (EmptySampleError, ValueError) as exc:
                        failures += 1
                        log.info("episode %d: transform refresh failed (%s); keeping previous", ep, exc)
                if h is not None:
                    G = np.asarray(h(G), dtype=float)

        batch = EpisodeBatch(obs, acts, log_prob(params, obs, acts), rews, G, transformed)
        params = reinforce_update(params, batch, cfg, opt)
    return TrainResult(params, np.array(curve), np.array(lengths), failures, cfg.to_dict())


def evaluate(params: PolicyParams, env, cfg: TrainConfig, n_episodes: int | None = None, seed: int = 0,
             greedy: bool = False, length: int | None = None) -> dict:
    """Seeded test rollouts; summary statistics of final raw returns.

    Episodes run in lock-step so the policy is evaluated once per time step
    for the whole batch.  Episode ``i`` draws from ``stream(seed, i)``.
    """
    n = int(n_episodes if n_episodes is not None else cfg.test_episodes)
    T = int(length if length is not None else cfg.test_episode_length)
    envs = [copy.deepcopy(env) for _ in range(n)]
    rngs = [stream(seed, i) for i in range(n)]
    obs = np.vstack([e.reset(r) for e, r in zip(envs, rngs)])
    act_rng = stream(seed, n)
    totals = np.zeros(n)
    steps = np.zeros(n, dtype=int)
    alive = np.ones(n, dtype=bool)
    mean_actions = []
    for _ in range(T):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        if params.head == "beta":
            mean_actions.append(mean_action(params, obs[idx]))
        acts = sample_actions(params, obs[idx], act_rng, greedy)
        for j, i in enumerate(idx):
            o, r, done = envs[i].step(acts[j])
            obs[i] = o
            totals[i] += r
            steps[i] += 1
            if done:
                alive[i] = False
    finals = _initial_return(env) + totals
    if hasattr(envs[0], "R"):
        finals = np.array([e.R for e in envs])
    out = {
        "n_episodes": n,
        "episode_length": T,
        "mean": float(finals.mean()),
        "median": float(np.median(finals)),
        "quantiles": {str(q): float(np.quantile(finals, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)},
        "mean_length": float(steps.mean()),
        "final_returns": finals.tolist(),
    }
    if mean_actions:
        out["mean_action"] = float(np.mean(np.concatenate(mean_actions)))
    return out
