import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodicrl.cartpole import (
    CartPoleEnv,
    CartPoleParams,
    CartPoleState,
    energy,
    reset,
    step,
    write_episode_summary_csv,
)

P = CartPoleParams()


def test_canonical_constants():
    assert (P.gravity, P.cart_mass, P.pole_mass, P.pole_half_length) == (9.8, 1.0, 0.1, 0.5)
    assert (P.force_magnitude, P.dt, P.position_threshold) == (10.0, 0.02, 2.4)
    assert P.angle_threshold == pytest.approx(math.radians(12))


def test_push_right_from_rest():
    # hand evaluation: temp = 10/1.1 = 9.0909, theta_acc = -14.634, x_acc = 9.7561
    nxt, r, done = step(CartPoleState(), 1)
    np.testing.assert_allclose(nxt.as_array(), [0.0, 0.19512, 0.0, -0.29268], atol=5e-6)
    assert r == 1.0 and not done


def test_push_left_is_mirror():
    right, _, _ = step(CartPoleState(), 1)
    left, _, _ = step(CartPoleState(), 0)
    np.testing.assert_allclose(left.as_array(), -right.as_array(), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    s=st.lists(st.floats(-0.2, 0.2), min_size=4, max_size=4),
    action=st.sampled_from([0, 1]),
)
def test_reflection_symmetry(s, action):
    state = CartPoleState(*s)
    a, _, da = step(state, action)
    b, _, db = step(-state, 1 - action)
    np.testing.assert_allclose(b.as_array(), -a.as_array(), atol=1e-12)
    assert da == db


def test_terminates_past_angle_threshold():
    _, _, done = step(CartPoleState(pole_angle=0.3), 1)
    assert done


def test_terminates_past_position():
    _, _, done = step(CartPoleState(cart_position=2.5), 0)
    assert done


def test_non_finite_state_rejected():
    with pytest.raises(ValueError):
        step(CartPoleState(pole_angle=math.nan), 0)


def test_bad_action_rejected():
    with pytest.raises(ValueError):
        step(CartPoleState(), 2)


def test_reset_range_and_determinism():
    a, b = reset(4), reset(4)
    assert a == b
    assert a != reset(5)
    for seed in range(200):
        assert np.all(np.abs(reset(seed).as_array()) <= 0.05)


def test_params_validation():
    with pytest.raises(ValueError):
        CartPoleParams(pole_mass=0.0)


def test_pole_scale_override():
    q = P.with_pole_scale(1.5)
    assert q.pole_half_length == pytest.approx(0.75)
    assert q.pole_mass == P.pole_mass


def _energy_drift(dt, t_end=0.5):
    p = CartPoleParams(dt=dt, angle_threshold=math.pi)
    s = CartPoleState(pole_angle=0.05)
    e0 = energy(s, p)
    for _ in range(int(round(t_end / dt))):
        s, _, _ = step(s, 0, p, force=0.0)
    return abs(energy(s, p) - e0)


def test_energy_drift_is_first_order():
    d1, d2 = _energy_drift(0.002), _energy_drift(0.001)
    assert d1 < 1e-3
    assert d1 / d2 == pytest.approx(2.0, rel=0.2)


def test_episode_return_equals_length():
    env = CartPoleEnv()
    env.reset(np.random.default_rng(0))
    total, n = 0.0, 0
    done = False
    while not done and n < 500:
        _, r, done = env.step(1)
        total += r
        n += 1
    assert done and total == n


def test_episode_summary_csv(tmp_path):
    p = write_episode_summary_csv([3, 5], [3.0, 5.0], tmp_path / "s.csv")
    assert p.read_text().splitlines() == ["episode,length,return", "0,3,3.0", "1,5,5.0"]
