"""Cloud decomposition: speed-comparison merging and the full analysis report.

Start from singleton blocks and repeatedly merge any adjacent pair whose left
block is strictly faster than its right neighbour.  The procedure terminates
after at most N merges and, no matter which eligible pair is merged first,
lands on the same partition: the unique decomposition of the particles into
stable clouds ordered by non-decreasing speed.  On top of the partition this
module assembles the complete long-run picture: per-gap loads (geometric
parameters inside clouds, clamped balance values at the widening gaps between
them), per-particle speeds, limiting gap laws, expected cloud widths, and the
classification flags.

Floating point cannot resolve the exact dichotomies (equal adjacent speeds,
loads exactly 1), so comparisons carry a relative tolerance band and anything
inside the band is reported as a critical tie rather than silently decided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    TIE_TOL,
    CloudReport,
    DiscreteInterval,
    GeometricProductLaw,
    OrderedPartition,
    RateSystem,
    expected_cloud_width,
    hv,
    interior_loads,
    singleton_partition,
)
from .jackson import reduced_params, solve_general_traffic

MERGE_POLICIES = ("leftmost", "rightmost", "all", "random")


@dataclass(frozen=True)
class MergeStep:
    """One row of the merge trace.

    A merge row carries in `merged` the 0-based index (into the previous
    row's snapshot) of the left part of the united pair; the opening row and
    the terminal stop row carry None.  iteration counts scans of the
    comparison loop; under the "all" policy several merge rows share one
    iteration number.
    """

    iteration: int
    partition: OrderedPartition
    speeds: tuple[float, ...]
    merged: int | None


@dataclass(frozen=True)
class MergeTrace:
    steps: tuple[MergeStep, ...]

    @property
    def n_merges(self) -> int:
        return sum(1 for s in self.steps if s.merged is not None)


def _tie_band(x: float, y: float) -> float:
    return TIE_TOL * max(1.0, abs(x), abs(y))


def cloud_partition(rates: RateSystem, merge_policy: str = "all",
                    policy_seed: int | None = None
                    ) -> tuple[OrderedPartition, MergeTrace]:
    """Run the merging procedure; returns the partition and its full trace.

    merge_policy picks which flagged adjacent pair(s) to unite per sweep:
    "leftmost", "rightmost", a "random" eligible one (seeded by policy_seed),
    or "all" of them, the default.  All policies reach the same partition;
    the choice only reshapes the trace.  Pairs whose speeds differ by less
    than the tie band are never merged (the exact model keeps equal-speed
    blocks separate); they surface in the report as critical ties.
    """
    if merge_policy not in MERGE_POLICIES:
        raise ValueError(
            f"unknown merge policy {merge_policy!r}; pick one of {MERGE_POLICIES}"
        )
    rng = np.random.default_rng(0 if policy_seed is None else policy_seed)

    parts = list(singleton_partition(rates.n_particles).parts)
    speeds = [hv(rates, p) for p in parts]
    steps = [MergeStep(0, OrderedPartition(tuple(parts)), tuple(speeds), None)]
    iteration = 0
    while True:
        flagged = [j for j in range(len(parts) - 1)
                   if speeds[j] - speeds[j + 1] > _tie_band(speeds[j], speeds[j + 1])]
        iteration += 1
        if not flagged:
            break
        if merge_policy == "leftmost":
            chosen = [flagged[0]]
        elif merge_policy == "rightmost":
            chosen = [flagged[-1]]
        elif merge_policy == "random":
            chosen = [flagged[int(rng.integers(len(flagged)))]]
        else:
            chosen = flagged
        # Right-to-left keeps earlier indices valid; consecutive flagged
        # indices then chain into one block, the simultaneous reading.
        for j in sorted(chosen, reverse=True):
            left, right = parts[j], parts[j + 1]
            merged = DiscreteInterval(left.ell, left.m + right.m)
            parts[j : j + 2] = [merged]
            speeds[j : j + 2] = [hv(rates, merged)]
            steps.append(MergeStep(iteration, OrderedPartition(tuple(parts)),
                                   tuple(speeds), j))
    final = OrderedPartition(tuple(parts))
    steps.append(MergeStep(iteration, final, tuple(speeds), None))
    return final, MergeTrace(tuple(steps))


def speed_ties(rates: RateSystem, partition: OrderedPartition) -> tuple[int, ...]:
    """Boundary gap labels where adjacent parts have speeds inside the tie
    band; the exact model's behaviour there is unresolved."""
    out = []
    parts = partition.parts
    for j in range(len(parts) - 1):
        v1 = hv(rates, parts[j])
        v2 = hv(rates, parts[j + 1])
        if abs(v1 - v2) <= _tie_band(v1, v2):
            out.append(parts[j].last)
    return tuple(out)


def full_loads(rates: RateSystem, partition: OrderedPartition,
               tol: float = 1e-9) -> np.ndarray:
    """Per-gap loads of the whole system under the given cloud partition.

    Interior gaps of each part take the closed-form geometric parameters.
    Each boundary gap j between parts satisfies the clamped balance

        (b_j + a_{j+1}) rho_j = (1 ^ rho_{j-1}) a_j + (1 ^ rho_{j+1}) b_{j+1}

    where a neighbouring gap outside the system or belonging to the boundary
    set contributes the clamp value 1, and an interior neighbour contributes
    its (known, < 1) load.  Every equation is therefore explicit.  A boundary
    load below 1 - tol means the supplied partition is not the cloud
    partition, which is reported as an error.
    """
    if partition.n_particles != rates.n_particles:
        raise ValueError("partition does not cover this system")
    N = rates.n_gaps
    rho = np.empty(N)
    is_boundary = np.zeros(N + 2, dtype=bool)   # 1-based gap labels, padded
    for g in partition.boundary_gaps:
        is_boundary[g] = True
    for part in partition:
        vals = interior_loads(rates, part)
        for k, j in enumerate(part.interior_gaps):
            rho[j - 1] = vals[k]

    def clamped(g: int) -> float:
        # contribution of neighbour gap g: outside gaps and boundary gaps sit
        # at (or above) the clamp; interior gaps are strictly below it
        if g < 1 or g > N or is_boundary[g]:
            return 1.0
        return min(1.0, rho[g - 1])

    a, b = rates.a, rates.b
    for g in partition.boundary_gaps:
        num = clamped(g - 1) * a[g - 1] + clamped(g + 1) * b[g]
        rho[g - 1] = num / (b[g - 1] + a[g])
        if rho[g - 1] < 1.0 - tol:
            raise ValueError(
                f"boundary gap {g} came out with load {rho[g - 1]:.6g} < 1; "
                "the supplied partition is not the cloud partition"
            )
    return rho


def particle_speeds(rates: RateSystem, loads) -> np.ndarray:
    """Limiting speed of each particle from the per-gap loads:

        v_i = (1 ^ rho_i) b_i - (1 ^ rho_{i-1}) a_i

    with the outside gaps clamped at 1.  The result must be non-decreasing;
    anything else signals inconsistent inputs.
    """
    loads = np.asarray(loads, dtype=np.float64)
    if loads.size != rates.n_gaps:
        raise ValueError("need one load per gap")
    clamp = np.ones(rates.n_gaps + 2)
    clamp[1:-1] = np.minimum(1.0, loads)
    v = clamp[1:] * rates.b - clamp[:-1] * rates.a
    scale = max(1.0, float(np.abs(v).max()))
    if np.any(np.diff(v) < -1e-10 * scale):
        raise ValueError("computed speeds are not non-decreasing; "
                         "loads are inconsistent with a cloud partition")
    return v


def _all_speeds_positive(rates: RateSystem) -> bool:
    """Prefix-product criterion: prod_{i<=k} a_i < prod_{i<=k} b_i for all k,
    evaluated in log space (a zero left rate settles all later prefixes)."""
    log_b = np.cumsum(np.log(rates.b))
    with np.errstate(divide="ignore"):
        log_a = np.cumsum(np.log(rates.a))
    return bool(np.all(log_a < log_b))


def analyze(rates: RateSystem) -> CloudReport:
    """The complete long-run report of a rate system."""
    partition, trace = cloud_partition(rates)
    rho = full_loads(rates, partition)
    speeds = particle_speeds(rates, rho)
    cloud_speeds = tuple(hv(rates, p) for p in partition)

    stationary = []
    widths = []
    for part in partition:
        if part.m == 1:
            stationary.append(None)
            widths.append(None)
        else:
            law = GeometricProductLaw(rho[np.array(part.interior_gaps) - 1])
            stationary.append(law)
            widths.append(expected_cloud_width(law))

    ties = list(speed_ties(rates, partition))
    for g in partition.boundary_gaps:
        if abs(rho[g - 1] - 1.0) <= TIE_TOL * max(1.0, rho[g - 1]) and g not in ties:
            ties.append(g)
    ties = tuple(sorted(ties))

    flags = {
        "all_singletons": all(p.m == 1 for p in partition),
        "single_cloud": len(partition) == 1,
        "all_speeds_positive": _all_speeds_positive(rates),
        "critical_tie": bool(ties),
    }

    clt = None
    if flags["single_cloud"] and rates.n_gaps == 1 and not ties:
        from .simulate import clt_constants_two_particle

        clt = clt_constants_two_particle(rates)

    return CloudReport(
        partition=partition,
        rho=rho,
        speeds=speeds,
        cloud_speeds=cloud_speeds,
        stationary=tuple(stationary),
        expected_widths=tuple(widths),
        flags=flags,
        clt=clt,
        ties=ties,
        trace=trace,
    )


def check_partition(rates: RateSystem, candidate: OrderedPartition,
                    tol: float = 1e-9) -> bool:
    """Is the candidate the cloud partition?

    True iff the reduced traffic equations of every non-singleton part have
    all loads below 1 on its interior gaps, and the clamped balance loads at
    all part boundaries come out at or above 1.
    """
    if candidate.n_particles != rates.n_particles:
        return False
    for part in candidate:
        if part.m == 1:
            continue
        sol = solve_general_traffic(reduced_params(rates, part))
        if np.any(sol.rho >= 1.0 - tol):
            return False
    try:
        full_loads(rates, candidate, tol=tol)
    except ValueError:
        return False
    return True
