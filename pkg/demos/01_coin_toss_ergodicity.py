"""The coin toss looks profitable on average and still ruins almost everyone.

Heads adds half the current return, tails takes away 40%.  The expected
factor per toss is 1.05, so the average over many players grows.  The
typical factor per toss is sqrt(1.5 * 0.6) < 1, so a single player who
keeps playing loses.

    python3 demos/01_coin_toss_ergodicity.py
"""

import math

import numpy as np

from ergodicrl.diagnostics import ergodicity_witness, growth_stats, kelly_oracle
from ergodicrl.envs import CoinTossConfig, rollout_ensemble


def main():
    w = ergodicity_witness(seed=0)
    print("Ensemble view (many players, 10 tosses each)")
    print(f"  mean final return  {w['ensemble_mean']:10.3f} +- {w['ensemble_mean_se']:.3f}")
    print(f"  expected           {w['ensemble_mean_expected']:10.3f}")
    print()
    print("Time view (one player, many tosses)")
    print(f"  per-toss log growth {w['time_average_growth']:+.5f} +- {w['time_average_growth_se']:.5f}")
    print(f"  expected            {w['time_average_growth_expected']:+.5f}")
    print()

    stats = growth_stats(rollout_ensemble(CoinTossConfig(horizon=1000), 1.0, 1000, seed=1))
    share_down = float(np.mean(stats.time_average_growth < 0))
    print("1000 players, 1000 tosses, betting everything")
    print(f"  median final return {stats.final_median:.3g} (deterministic middle path {100 * 0.9**500:.3g})")
    print(f"  share of players who lost money: {share_down:.1%}")
    print()

    F, g = kelly_oracle()
    print(f"Betting a fraction F of the return instead: growth peaks at F* = {F} with g = {g:.6f} per toss,")
    print(f"so the player doubles roughly every {math.log(2) / g:.0f} tosses.")


if __name__ == "__main__":
    main()
