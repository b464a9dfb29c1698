"""Central limit behaviour of a stable pair, two ways.

For a = [0.2, 1], b = [1, 1] the closed forms give speed 0.4 and variance
0.6.  We standardize displacements across replicas and print a text
histogram against the normal curve, then re-estimate the variance from
excursion records of a single long run.
"""

import math

import numpy as np

from excloud import (SimConfig, clt_constants_two_particle, estimate_sigma2,
                     excursion_rate, extract_excursions, run_replicas,
                     validate)


def main():
    rates = validate([0.2, 1.0], [1.0, 1.0])
    v, sigma2 = clt_constants_two_particle(rates)
    print(f"closed forms: speed = {v}, variance = {sigma2}")

    t, n_rep = 2e3, 400
    cfg = SimConfig(horizon=t, seed=21, burn_in=0.0,
                    track_joint=False, track_pairs=False)
    runs = run_replicas(rates, cfg, n_rep)
    disp = np.array([s.displacement[0] for s in runs], dtype=np.float64)
    z = (disp - v * t) / math.sqrt(sigma2 * t)
    print(f"\n{n_rep} replicas at T = {t:g}: standardized displacement")
    print(f"  sample mean {z.mean():+.4f}   sample variance {z.var(ddof=1):.4f}"
          "   (target 0, 1)")

    edges = np.linspace(-3, 3, 13)
    counts, _ = np.histogram(z, bins=edges)
    print("\n   bin           observed  expected")
    for k, c in enumerate(counts):
        lo, hi = edges[k], edges[k + 1]
        p = 0.5 * (math.erf(hi / math.sqrt(2)) - math.erf(lo / math.sqrt(2)))
        bar = "#" * c
        print(f"  [{lo:+.1f},{hi:+.1f})  {c:4d} {n_rep * p:7.1f}  {bar}")

    horizon = 5e4
    exc = extract_excursions(rates, SimConfig(horizon=horizon, seed=22,
                                              track_joint=False,
                                              track_pairs=False))
    rate = excursion_rate(rates)
    est = estimate_sigma2(exc, rates)
    print(f"\nsingle run, T = {horizon:g}: {exc.shape[0]} excursions "
          f"(expected about {rate * horizon:.0f})")
    print(f"  mean duration {exc[:, 1].mean():.4f}  (1/alpha = {1 / rate:.4f})")
    print(f"  excursion variance estimate {est:.4f}  (closed form {sigma2})")


if __name__ == "__main__":
    main()
