import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodicrl.diagnostics import (
    coin_toss_sampler,
    ensemble_average,
    ergodicity_witness,
    gbm_sampler,
    growth_stats,
    increment_variance_by_bin,
    kelly_growth,
    kelly_oracle,
    proportionality_check,
    sigmoid_utility_score,
    time_average_growth,
)
from ergodicrl.envs import CoinTossConfig, Trajectory, rollout_coin_toss, rollout_ensemble


class TestEnsembleAverage:
    def test_identical(self):
        t = Trajectory.from_returns([1.0, 2.0, 4.0])
        assert ensemble_average([t, t, t], 2) == 4.0

    def test_two_values(self):
        a = Trajectory.from_returns([0.0, 0.0])
        b = Trajectory.from_returns([0.0, 2.0])
        assert ensemble_average([a, b], 1) == 1.0
        assert ensemble_average([a, b], 1, field="rewards") == 1.0

    def test_ragged(self):
        with pytest.raises(ValueError):
            ensemble_average([Trajectory.from_returns([1.0, 2.0]), Trajectory.from_returns([1.0])], 0)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            ensemble_average([Trajectory.from_returns([1.0, 2.0])], 5)


class TestTimeAverage:
    def test_deterministic_growth(self):
        R = 3.0 * 1.1 ** np.arange(20)
        assert time_average_growth(R) == pytest.approx(math.log(1.1), rel=1e-12)

    def test_zero_bet(self):
        assert time_average_growth(rollout_coin_toss(CoinTossConfig(horizon=50), 0.0, 1)) == 0.0

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            time_average_growth(np.array([1.0, 0.0, 1.0]))

    def test_long_coin_toss(self):
        g = time_average_growth(rollout_coin_toss(CoinTossConfig(horizon=100_000), 1.0, 11))
        assert g == pytest.approx(0.5 * math.log(0.9), abs=0.005)


def test_growth_stats_quantiles_ordered():
    s = growth_stats(rollout_ensemble(CoinTossConfig(horizon=50), 0.5, 200, seed=0))
    q = list(s.final_quantiles.values())
    assert q == sorted(q)
    assert s.n_trajectories == 200
    assert s.ensemble_mean_by_time[0] == 100.0


class TestKelly:
    def test_paper_game(self):
        F, g = kelly_oracle()
        assert F == 0.25
        assert g == pytest.approx(0.5 * math.log(1.0125), rel=1e-9)

    def test_stationarity_condition(self):
        # 0.25 (1 - 0.4 F) = 0.2 (1 + 0.5 F) at F*
        F, _ = kelly_oracle()
        assert 0.25 * (1 - 0.4 * F) == pytest.approx(0.2 * (1 + 0.5 * F))

    def test_zero_edge(self):
        F, g = kelly_oracle(CoinTossConfig(gain_frac=0.4, loss_frac=0.4))
        assert F == 0.0 and g == 0.0

    def test_refinement_stable(self):
        F1, _ = kelly_oracle(resolution=1000)
        F2, _ = kelly_oracle(resolution=10_000)
        assert abs(F1 - F2) <= 1e-3

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            kelly_oracle(resolution=10)

    def test_growth_at_ruinous_bet(self):
        assert kelly_growth(1.0) == pytest.approx(0.5 * math.log(0.9))


class TestVarianceByBin:
    def test_additive_walk(self):
        z = np.random.default_rng(0).standard_normal(20_000)
        walk = Trajectory.from_returns(np.concatenate(([0.0], np.cumsum(z))))
        assert increment_variance_by_bin(walk)["ratio"] < 1.3

    def test_sparse_bins_merge(self):
        rep = increment_variance_by_bin(Trajectory.from_returns(np.cumsum(np.ones(40))), n_bins=10, min_count=10)
        assert rep["merged_bins"] > 0
        assert rep["counts"].sum() == 39

    def test_reports_errors_and_counts(self):
        t = rollout_coin_toss(CoinTossConfig(horizon=2000), 1.0, 0)
        rep = increment_variance_by_bin(t)
        assert rep["variance"].shape == rep["standard_error"].shape == rep["counts"].shape


class TestProportionality:
    def test_zero_drift_ratio_one(self):
        rep = proportionality_check(gbm_sampler(drift=0.0), [1.0, 10.0], 200_000, seed=0)
        for row in rep["rows"]:
            assert row["ratio"] == pytest.approx(1.0, abs=1e-3)

    def test_coin_toss_constant(self):
        # E[X^2] = 0.205, Var = 0.2025 per unit level squared
        rep = proportionality_check(coin_toss_sampler(), [10.0, 30.0, 100.0], 500_000, seed=1)
        for row in rep["rows"]:
            assert row["ratio"] == pytest.approx(0.205 / 0.2025, abs=0.01)
        assert rep["ratio_spread"] < 1.01

    def test_gbm_spread(self):
        rep = proportionality_check(gbm_sampler(), [10, 20, 40, 70, 100], 200_000, seed=2)
        assert rep["ratio_spread"] <= 1.5

    def test_standard_error_halves_with_four_times_samples(self):
        a = proportionality_check(coin_toss_sampler(), [10.0], 10_000, seed=3)["rows"][0]["second_moment_se"]
        b = proportionality_check(coin_toss_sampler(), [10.0], 40_000, seed=3)["rows"][0]["second_moment_se"]
        assert a / b == pytest.approx(2.0, rel=0.05)


class TestSigmoidScore:
    def test_saturated_one(self):
        assert sigmoid_utility_score([1.0, 2.0, 3.0], m0=0, g0=1e3) == pytest.approx(6.0)

    def test_saturated_zero(self):
        assert sigmoid_utility_score([1.0, 2.0, 3.0], m0=100, g0=1e3) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(c=st.floats(-10, 10), n=st.integers(1, 200), g0=st.floats(0.01, 5))
    def test_naive_loop(self, c, n, g0):
        m0 = n / 2
        naive = sum(c / (1 + math.exp(-g0 * (u - m0))) for u in range(1, n + 1))
        assert sigmoid_utility_score([c] * n, m0, g0) == pytest.approx(naive, rel=1e-10, abs=1e-10)

    def test_rejects(self):
        with pytest.raises(ValueError):
            sigmoid_utility_score([1.0], 0, 0)
        with pytest.raises(ValueError):
            sigmoid_utility_score([np.inf], 0, 1)


def test_witness_signs_split():
    w = ergodicity_witness(n_ensemble=20_000, t_time=50_000, seed=3)
    assert w["ensemble_mean"] == pytest.approx(100 * 1.05**10, rel=0.05)
    assert w["time_average_growth"] < 0
    assert abs(w["time_average_growth"] - w["time_average_growth_expected"]) < 3.5 * w["time_average_growth_se"]


def test_ensemble_standard_error_scales():
    # doubling the ensemble shrinks the reported SE by about sqrt 2, averaged over repeats
    ratios = []
    for s in range(5):
        a = ergodicity_witness(n_ensemble=5_000, t_time=10, seed=10 + s)["ensemble_mean_se"]
        b = ergodicity_witness(n_ensemble=10_000, t_time=10, seed=20 + s)["ensemble_mean_se"]
        ratios.append(a / b)
    assert np.mean(ratios) == pytest.approx(math.sqrt(2), rel=0.15)


def test_log_ratio_survives_underflow():
    # the full-bet path reaches ~1e-227, where raw increment variances underflow to zero
    rep = increment_variance_by_bin(rollout_coin_toss(CoinTossConfig(horizon=10_000), 1.0, 0))
    assert rep["ratio"] == math.inf
    assert 100 < rep["log10_ratio"] < 1000


def test_log_ratio_matches_plain_ratio():
    rep = increment_variance_by_bin(rollout_coin_toss(CoinTossConfig(horizon=500), 0.3, 0))
    assert 10 ** rep["log10_ratio"] == pytest.approx(rep["ratio"], rel=1e-9)
