"""Convergence of empirical gap marginals to the product-geometric law.

For a drift-free slow-ends instance every interior gap is geometric with the
same parameter; the total-variation distance of the empirical occupation law
should shrink like 1/sqrt(T).
"""

from excloud import (SimConfig, analyze, empirical_gap_law, geometric_bins,
                     simulate, tv_distance, validate)

A = [0.4, 1, 1, 1]
B = [1, 1, 1, 0.4]


def main():
    rates = validate(A, B)
    report = analyze(rates)
    print(f"instance a = {A}, b = {B}")
    print(f"partition {report.partition!r}, "
          f"gap loads {report.rho.round(6).tolist()}")
    print()
    print("      T      " + "".join(f"TV(gap {g})   " for g in (1, 2, 3)))
    for T in (1e2, 1e3, 1e4, 1e5):
        stats = simulate(rates, SimConfig(horizon=T, seed=5,
                                          track_joint=False,
                                          track_pairs=False))
        law = empirical_gap_law(stats)
        tvs = [tv_distance(marg, geometric_bins(report.rho[g - 1], marg.size))
               for g, marg in law.marginals.items()]
        print(f"  {T:8.0f}   " + "".join(f"{tv:10.5f}   " for tv in tvs))
    print()
    print("each column should fall roughly like 1/sqrt(T)")


if __name__ == "__main__":
    main()
