"""Learning the transform that turns a multiplicative path into a random walk.

For geometric Brownian motion the answer is known: the logarithm.  The
learner never sees that formula.  It fits the local increment variance
against the level and integrates one over its square root.

    python3 demos/02_learn_transform.py
"""

import numpy as np

from ergodicrl.diagnostics import increment_variance_by_bin
from ergodicrl.experiments import coin_toss_pilot, gbm_pilot, log_recovery
from ergodicrl.transform import learn_transform


def report(name, path):
    h = learn_transform(path)
    fit = log_recovery(h)
    raw = increment_variance_by_bin(path)
    tr = increment_variance_by_bin(path, h)
    print(name)
    print(f"  h(u) ~ a ln u + b with a = {fit['a']:.4f}, b = {fit['b']:.4f}; R^2 = {fit['r_squared']:.6f} over {fit['n_points']} grid points")
    print(f"  decile increment variance, max/min: raw 10^{raw['log10_ratio']:.1f}, transformed {tr['ratio']:.3f}")
    return h


def main():
    report("Geometric Brownian motion, 100000 steps", gbm_pilot())
    h = report("Coin toss at full bet, 10000 tosses", coin_toss_pilot())
    u = np.array([1e-100, 1e-10, 1.0, 100.0])
    print()
    print("  the coin-toss transform at a few levels (differences are proportional to the log ratio):")
    for a, b in zip(u[:-1], u[1:]):
        print(f"    h({b:.0e}) - h({a:.0e}) = {float(h(b) - h(a)):9.3f}   ln ratio = {np.log(b / a):9.3f}   quotient {float(h(b) - h(a)) / np.log(b / a):.3f}")


if __name__ == "__main__":
    main()
