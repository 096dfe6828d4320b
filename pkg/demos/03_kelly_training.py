"""A policy-gradient agent learns the Kelly fraction, but only on transformed returns.

Trained on raw returns, the agent chases the growing ensemble mean and bets
nearly everything.  Trained on the learned transform of its return, it
settles near the growth-optimal fraction of 0.25.

    python3 demos/03_kelly_training.py [n_seeds]
"""

import sys

from ergodicrl.diagnostics import kelly_oracle
from ergodicrl.experiments import coin_toss_pilot, kelly_run
from ergodicrl.transform import learn_transform


def main(n_seeds=3):
    F_star, _ = kelly_oracle()
    h = learn_transform(coin_toss_pilot())
    print(f"growth-optimal bet F* = {F_star}")
    print(f"{'seed':>4}  {'raw: mean bet':>14}  {'raw: median':>12}  {'transformed: mean bet':>22}  {'transformed: median':>20}")
    for s in range(n_seeds):
        raw = kelly_run(s, "none")
        tr = kelly_run(s, "static", transform=h)
        print(f"{s:>4}  {raw['mean_action']:>14.3f}  {raw['median']:>12.3g}  {tr['mean_action']:>22.3f}  {tr['median']:>20.3g}")
    print("medians are over 100 fresh games of 1000 tosses starting from 100")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
