"""Does training on transformed episode returns make cart-pole policies sturdier?

Both agents train on the standard pole.  One uses raw returns-to-go, the
other relearns a transform from every episode.  Both are then tested on a
pole whose half-length is 1.5 times longer.  The effect is modest and
varies by seed, so several seeds are shown side by side.

    python3 demos/04_cartpole_robustness.py [n_seeds]
"""

import sys

from ergodicrl.experiments import cartpole_run


def main(n_seeds=3):
    wins = 0
    print(f"{'seed':>4}  {'standard':>9}  {'ergodic':>8}  {'transform fallbacks':>19}")
    for s in range(n_seeds):
        std = cartpole_run(s, "none")
        erg = cartpole_run(s, "per-episode")
        wins += erg["test_mean"] > std["test_mean"]
        print(f"{s:>4}  {std['test_mean']:>9.1f}  {erg['test_mean']:>8.1f}  {erg['transform_failures']:>19}")
    print(f"mean steps balanced on the longer pole; ergodic agent ahead on {wins}/{n_seeds} seeds")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
