"""Two clouds drifting apart, watched through position snapshots.

The instance a = [0,0,0], b = [2,1,1.5] splits into a slow pair and a fast
singleton; the gap between particles 2 and 3 grows linearly at the speed
difference 1.5 - 1.0 = 0.5 while the pair's internal gap stays tight.
"""

import numpy as np

from excloud import SimConfig, analyze, simulate, validate


def main():
    rates = validate([0, 0, 0], [2, 1, 1.5])
    report = analyze(rates)
    print(f"partition     {report.partition!r}")
    print(f"cloud speeds  {np.round(report.cloud_speeds, 6).tolist()}")
    print()

    horizon = 200.0
    times = tuple(np.linspace(0.0, horizon, 11))
    stats = simulate(rates, SimConfig(horizon=horizon, seed=3,
                                      sample_times=times,
                                      track_joint=False, track_pairs=False))
    ts, positions = stats.snapshots
    print("   time     x1     x2     x3    gap12   gap23   gap23/t")
    for t, row in zip(ts, positions):
        x1, x2, x3 = (int(v) for v in row)
        g12 = x2 - x1 - 1
        g23 = x3 - x2 - 1
        ratio = g23 / t if t > 0 else float("nan")
        print(f"  {t:6.1f} {x1:6d} {x2:6d} {x3:6d}  "
              f"{g12:6d}  {g23:6d}    {ratio:5.3f}")
    print()
    print("gap23/t approaches the speed difference 0.5; gap12 stays O(1)")


if __name__ == "__main__":
    main()
