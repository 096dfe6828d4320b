import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodicrl.agent import (
    EpisodeBatch,
    NonFiniteGradient,
    PolicyParams,
    TrainConfig,
    evaluate,
    init_policy,
    log_prob,
    policy_forward,
    reinforce_update,
    returns_to_go,
    sample_actions,
    score_gradient,
    train,
)
from ergodicrl.cartpole import CartPoleEnv
from ergodicrl.envs import CoinTossConfig, CoinTossEnv
from oracles import central_difference


def _random_instance(seed, head):
    rng = np.random.default_rng(seed)
    obs_dim = int(rng.integers(1, 5))
    hidden = int(rng.integers(2, 9))
    n_out = 2 if head == "beta" else int(rng.integers(2, 5))
    p = init_policy(obs_dim, n_out, hidden, head, rng)
    # larger output weights than the init so the check is not trivially linear
    p = p.with_flat(p.flat() + rng.normal(0, 0.5, p.flat().size))
    n = int(rng.integers(1, 12))
    obs = rng.normal(size=(n, obs_dim))
    acts = rng.uniform(0.02, 0.98, n) if head == "beta" else rng.integers(0, n_out, n)
    w = rng.normal(size=n)
    return p, obs, acts, w


@pytest.mark.parametrize("head", ["softmax", "beta"])
@pytest.mark.parametrize("instance", range(20))
def test_gradient_matches_finite_differences(head, instance):
    p, obs, acts, w = _random_instance(100 * instance + (head == "beta"), head)
    _, grads = score_gradient(p, obs, acts, w)
    analytic = np.concatenate([g.ravel() for g in grads])

    def value(v):
        return float(np.dot(w, log_prob(p.with_flat(v), obs, acts)))

    numeric = central_difference(value, p.flat())
    rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
    assert rel <= 1e-5


def test_value_matches_log_prob():
    p, obs, acts, w = _random_instance(3, "beta")
    v, _ = score_gradient(p, obs, acts, w)
    assert v == pytest.approx(float(np.dot(w, log_prob(p, obs, acts))), rel=1e-12)


def test_beta_log_prob_matches_scipy():
    from scipy.stats import beta as beta_dist

    p, obs, acts, _ = _random_instance(8, "beta")
    a, b = policy_forward(p, obs)
    np.testing.assert_allclose(log_prob(p, obs, acts), beta_dist.logpdf(acts, a, b), rtol=1e-10)


class TestForward:
    def _zero(self, head, n_out):
        p = init_policy(3, n_out, 4, head, np.random.default_rng(0))
        return p.with_flat(np.zeros_like(p.flat()))

    def test_zero_weights_uniform(self):
        np.testing.assert_allclose(policy_forward(self._zero("softmax", 2), np.ones(3)), [0.5, 0.5])

    def test_zero_weights_beta_symmetric(self):
        a, b = policy_forward(self._zero("beta", 2), np.ones(3))
        assert a == b and a / (a + b) == 0.5

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_probabilities_normalised(self, seed):
        p, obs, _, _ = _random_instance(seed, "softmax")
        probs = policy_forward(p, obs)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs >= 0)

    def test_beta_parameters_at_least_one(self):
        p, obs, _, _ = _random_instance(5, "beta")
        a, b = policy_forward(p, obs * 100)
        assert np.all(a >= 1) and np.all(b >= 1)

    def test_non_finite_observation(self):
        p, _, _, _ = _random_instance(1, "softmax")
        with pytest.raises(ValueError):
            policy_forward(p, np.full(p.obs_dim, np.nan))

    def test_samples_in_range(self):
        p, obs, _, _ = _random_instance(2, "beta")
        x = sample_actions(p, obs, np.random.default_rng(0))
        assert np.all((x > 0) & (x < 1))

    def test_unknown_head(self):
        with pytest.raises(ValueError):
            init_policy(2, 2, 4, "gauss", np.random.default_rng(0))


class TestReturnsToGo:
    @settings(max_examples=50, deadline=None)
    @given(r=st.lists(st.floats(-100, 100), min_size=1, max_size=50), gamma=st.floats(0.01, 1.0))
    def test_recursion(self, r, gamma):
        G = returns_to_go(r, gamma)
        np.testing.assert_array_equal(G[:-1], np.array(r[:-1]) + gamma * G[1:])
        assert G[-1] == r[-1]

    def test_undiscounted_is_reverse_cumsum(self):
        np.testing.assert_allclose(returns_to_go([1, 2, 3], 1.0), [6, 5, 3])


def _batch(p, obs, acts, G):
    r = np.zeros(len(acts))
    return EpisodeBatch(obs, acts, log_prob(p, obs, acts), r, np.asarray(G, float))


class TestUpdate:
    def test_zero_advantage_leaves_params(self):
        p, obs, acts, _ = _random_instance(4, "softmax")
        out = reinforce_update(p, _batch(p, obs, acts, np.full(len(acts), 3.0)), TrainConfig())
        np.testing.assert_array_equal(out.flat(), p.flat())

    def test_single_step_direction(self):
        p, obs, acts, _ = _random_instance(6, "softmax")
        obs, acts = obs[:1], acts[:1]
        cfg = TrainConfig(baseline="none", epochs=1, learning_rate=0.01)
        out = reinforce_update(p, _batch(p, obs, acts, [2.5]), cfg)
        _, g = score_gradient(p, obs, acts, [1.0])
        expected = p.flat() + 0.01 * 2.5 * np.concatenate([x.ravel() for x in g])
        np.testing.assert_allclose(out.flat(), expected, rtol=0, atol=1e-15)

    def test_epochs_recompute(self):
        p, obs, acts, _ = _random_instance(7, "softmax")
        b = _batch(p, obs, acts, np.arange(len(acts), dtype=float))
        one = reinforce_update(p, b, TrainConfig(epochs=1, learning_rate=0.05))
        two = reinforce_update(one, b, TrainConfig(epochs=1, learning_rate=0.05))
        both = reinforce_update(p, b, TrainConfig(epochs=2, learning_rate=0.05))
        np.testing.assert_allclose(both.flat(), two.flat(), atol=1e-14)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_gradient_aborts(self):
        p, obs, acts, _ = _random_instance(9, "softmax")
        G = np.zeros(len(acts))
        G[0] = np.inf
        with pytest.raises(NonFiniteGradient, match="batch stats"):
            reinforce_update(p, _batch(p, obs, acts, G), TrainConfig(baseline="none"))

    def test_inconsistent_batch(self):
        with pytest.raises(ValueError):
            EpisodeBatch(np.zeros((3, 1)), np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(3))


class TestConfig:
    def test_table_defaults(self):
        c = TrainConfig()
        assert (c.discount, c.training_episodes, c.test_episodes) == (0.99, 1000, 100)
        assert (c.train_episode_length, c.test_episode_length, c.epochs, c.learning_rate) == (100, 200, 10, 0.0007)
        assert c.hidden == 16

    @pytest.mark.parametrize(
        "kw", [dict(discount=0.0), dict(transform_mode="x"), dict(epochs=0), dict(learning_rate=-1.0), dict(optimizer="rmsprop")]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


def test_policy_json_roundtrip(tmp_path):
    p, _, _, _ = _random_instance(11, "beta")
    path = p.save(tmp_path / "p.json", config={"a": 1})
    back = PolicyParams.load(path)
    np.testing.assert_array_equal(back.flat(), p.flat())
    assert back.head == "beta"
    import json

    assert len(json.loads(path.read_text())["config_hash"]) == 16


SMALL = TrainConfig(training_episodes=5, train_episode_length=20, test_episode_length=20, epochs=2)


def test_training_is_reproducible():
    a = train(CartPoleEnv(), SMALL, seed=3)
    b = train(CartPoleEnv(), SMALL, seed=3)
    np.testing.assert_array_equal(a.params.flat(), b.params.flat())
    np.testing.assert_array_equal(a.curve, b.curve)
    assert not np.array_equal(a.params.flat(), train(CartPoleEnv(), SMALL, seed=4).params.flat())


def test_curve_holds_raw_returns():
    res = train(CartPoleEnv(), replace(SMALL, transform_mode="per-episode", transform_target="return_to_go"), seed=0)
    np.testing.assert_array_equal(res.curve, res.lengths)


def test_transform_failure_falls_back():
    # two-step episodes give too few samples to learn from
    cfg = TrainConfig(training_episodes=4, train_episode_length=2, epochs=1, transform_mode="per-episode")
    res = train(CoinTossEnv(CoinTossConfig(horizon=2)), cfg, seed=0)
    assert res.transform_failures == 4
    assert np.all(np.isfinite(res.params.flat()))


def test_static_needs_source():
    with pytest.raises(ValueError):
        train(CartPoleEnv(), replace(SMALL, transform_mode="static"))


def test_curve_csv(tmp_path):
    res = train(CartPoleEnv(), SMALL, seed=0)
    lines = res.write_curve_csv(tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "episode,raw_return" and len(lines) == 6


class TestEvaluate:
    def _const_beta(self, logit_a, logit_b):
        p = init_policy(1, 2, 4, "beta", np.random.default_rng(0))
        p = p.with_flat(np.zeros_like(p.flat()))
        p.b2[:] = [logit_a, logit_b]
        return p

    def test_near_full_bet_is_ruinous(self):
        # mean bet ~0.995; oracle median path 100*0.9^500 ~ 1e-21
        p = self._const_beta(200.0, -200.0)
        ev = evaluate(p, CoinTossEnv(CoinTossConfig(horizon=1000)), TrainConfig(), 100, seed=0, length=1000)
        assert ev["median"] < 1
        assert ev["mean_action"] > 0.99

    def test_tiny_bet_stays_near_start(self):
        p = self._const_beta(-200.0, 200.0)
        ev = evaluate(p, CoinTossEnv(CoinTossConfig(horizon=100)), TrainConfig(), 20, seed=0, length=100)
        # bets of ~0.5% move the return a few percent over 100 tosses
        np.testing.assert_allclose(ev["final_returns"], 100.0, rtol=0.15)
        assert ev["mean_action"] < 0.01

    def test_cartpole_bounded_by_length(self):
        res = train(CartPoleEnv(), SMALL, seed=0)
        ev = evaluate(res.params, CartPoleEnv(), SMALL, 10, seed=1, length=200)
        assert max(ev["final_returns"]) <= 200
        assert ev["quantiles"]["0.05"] <= ev["median"] <= ev["quantiles"]["0.95"]

    def test_seeded(self):
        p = self._const_beta(0.0, 0.0)
        env = CoinTossEnv(CoinTossConfig(horizon=50))
        a = evaluate(p, env, TrainConfig(), 10, seed=5, length=50)
        b = evaluate(p, env, TrainConfig(), 10, seed=5, length=50)
        assert a["final_returns"] == b["final_returns"]
