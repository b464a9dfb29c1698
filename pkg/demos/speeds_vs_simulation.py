"""Analytic particle speeds against Monte-Carlo estimates.

Runs a few replicas per instance and prints predicted speed, empirical mean,
and the standard error across replicas.  Everything should sit within a few
SE of the prediction.
"""

import numpy as np

from excloud import SimConfig, analyze, empirical_speeds, run_replicas, validate

HORIZON = 2e4
REPLICAS = 8

INSTANCES = [
    ("single slow leader", [0.2, 1, 1, 1, 1], [1, 1, 1, 1, 1]),
    ("slow ends, asymmetric", [0.3, 1, 1], [1, 1, 0.7]),
    ("two clouds", [0, 0, 0], [2, 1, 1.5]),
    ("all singletons", [0.5, 0.3, 0.1], [0.6, 0.7, 0.8]),
]


def main():
    for idx, (title, a, b) in enumerate(INSTANCES):
        rates = validate(a, b)
        report = analyze(rates)
        cfg = SimConfig(horizon=HORIZON, seed=90 + idx,
                        track_joint=False, track_pairs=False)
        runs = run_replicas(rates, cfg, REPLICAS)
        per_rep = np.stack([empirical_speeds(s, HORIZON) for s in runs])
        mean = per_rep.mean(axis=0)
        se = per_rep.std(axis=0, ddof=1) / np.sqrt(REPLICAS)

        print(f"=== {title}   (T = {HORIZON:g}, {REPLICAS} replicas)")
        print(f"    partition {report.partition!r}")
        print("    particle   predicted    simulated    (SE)       pull")
        for i, v in enumerate(report.speeds):
            pull = (mean[i] - v) / se[i]
            print(f"    {i + 1:<10d} {v:+.6f}    {mean[i]:+.6f}   "
                  f"({se[i]:.6f})  {pull:+.2f} SE")
        print()


if __name__ == "__main__":
    main()
