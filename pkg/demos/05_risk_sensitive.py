"""Exponential (risk-sensitive) transforms: exact where they fit, fragile where they do not.

Part one: if the exponential transform of the return is Brownian motion with
drift, the return itself follows an SDE with a closed-form solution.
Euler-Maruyama on the same noise converges to it at strong order one half.

Part two: applying the exponential transform to the coin toss instead of
the learned one.  The transform has one fixed scale, while coin-toss
returns range over hundreds of orders of magnitude.  With |beta| = 1 the
exponent beta*R leaves the double range during training for either sign,
and the run stops with a RangeError rather than silently saturating.  With
beta = 0.01 the squared gradients overflow the optimiser state and the bet
stays near its initial value of 0.5.  With beta = -0.01 the agent bets
sensibly in this run, but that depends on beta matching the return scale,
which is exactly what the learned transform avoids having to know.

    python3 demos/05_risk_sensitive.py
"""

import json
import math
import warnings

from ergodicrl.experiments import kelly_run
from ergodicrl.risk_sensitive import RangeError, RiskParams, closed_form_return, euler_maruyama, exp_transform, strong_error_ladder


def part_one():
    p = RiskParams(beta=-1.0, mu=0.05, sigma=0.2)
    path = euler_maruyama(p, closed_form_return(0.0, 0.0, p), 2.0**-10, 2**10, seed=0)
    exact = closed_form_return(path.times, path.brownian, p)
    print(f"one path, dt = 2^-10: final EM {path.values[-1]:.5f}, closed form {exact[-1]:.5f}")
    lad = strong_error_ladder(p)
    print("strong error ladder (100 seeds):")
    for dt, e, se in zip(lad["dts"], lad["mean_error"], lad["standard_error"]):
        print(f"  dt = 2^{math.log2(dt):.0f}   mean max error {e:.3e} +- {se:.1e}")
    orders = [round(math.log(r) / math.log(lad["dts"][0] / lad["dts"][1]), 3) for r in lad["ratios"]]
    print(f"  observed orders {orders} (theory 0.5)")
    return lad


def part_two(beta, n_episodes=300):
    def h(R):
        return exp_transform(R, beta)

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            run = kelly_run(0, "static", transform=h, overrides={"training_episodes": n_episodes})
    except (RangeError, FloatingPointError, ValueError, ArithmeticError) as exc:
        return {"beta": beta, "outcome": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return {"beta": beta, "outcome": "trained", "mean_bet": round(run["mean_action"], 4),
            "median": float(f"{run['median']:.3g}"), "transform_failures": run["result"].transform_failures,
            "numpy_warnings": sorted({str(w.message) for w in caught})}


def main():
    lad = part_one()
    print()
    print("coin toss with the exponential transform as reward shaping:")
    rows = [part_two(b) for b in (1.0, 0.01, -0.01, -1.0)]
    for r in rows:
        print(" ", json.dumps(r))
    return {"ladder": lad, "coin_toss": rows}


if __name__ == "__main__":
    main()
