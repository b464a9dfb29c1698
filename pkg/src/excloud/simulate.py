"""Exact continuous-time simulation of the particle system.

The chain is simulated event by event: in each state the enabled moves are
"particle i left at rate a_i if its left gap is open" and "particle i right at
rate b_i if its right gap is open" (the outermost moves are always enabled),
the holding time is exponential in the total enabled rate, and the move is
drawn proportionally.  This is equal in law to running independent exponential
clocks per particle and suppressing blocked rings, but needs fewer draws.

A run accumulates, over the window [burn_in, horizon]: per-gap occupation
times, the joint gap-state occupation map (small systems only, the state space
explodes), and pairwise gap tables.  Over the whole run it records particle
displacements, position snapshots on a caller-supplied time grid, and the
excursions of the gap vector between visits to the all-zero state, which feed
the central limit theorem estimators at the bottom of the module.

Reproducibility contract: replica r of master seed s draws from a PCG64
stream seeded by SeedSequence(entropy=s, spawn_key=(r,)).  The generator name
and splitting rule are recorded in SimStats.meta, and identical (rates,
config) inputs produce bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import TIE_TOL, DiscreteInterval, RateSystem, hv, interior_loads
from .partition import cloud_partition

RNG_FAMILY = "pcg64:seedseq(seed,(replica,))"

# The joint occupation map is only worth keeping while distinct visited states
# number in the thousands; beyond 6 gaps it is dropped automatically.  The
# pairwise tables are cheap and kept for any system that fits the budget.
_JOINT_MAX_GAPS = 6
_PAIR_CELL_BUDGET = 2 * 10**7


@dataclass(frozen=True)
class SimConfig:
    """Run parameters for a single simulation.

    initial_gaps = None means the packed configuration (all gaps zero,
    X_i(0) = i), which starts the excursion clock in a renewal state.
    burn_in = None defaults to 10% of the horizon.  The track_* switches
    default to automatic choices based on system size.
    """

    horizon: float
    seed: int = 0
    initial_gaps: tuple[int, ...] | None = None
    burn_in: float | None = None
    sample_times: tuple[float, ...] | None = None
    replica: int = 0
    occ_cap: int = 512
    joint_cap: int = 64
    pair_cap: int = 32
    track_joint: bool | None = None
    track_pairs: bool | None = None

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("horizon must be positive and finite")
        if self.burn_in is not None and not 0 <= self.burn_in < self.horizon:
            raise ValueError("burn_in must lie in [0, horizon)")
        if self.seed < 0 or self.replica < 0:
            raise ValueError("seed and replica index must be non-negative")
        for name in ("occ_cap", "joint_cap", "pair_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.initial_gaps is not None:
            gaps = tuple(int(g) for g in self.initial_gaps)
            if any(g < 0 for g in gaps):
                raise ValueError("initial gaps must be non-negative")
            object.__setattr__(self, "initial_gaps", gaps)
        if self.sample_times is not None:
            ts = tuple(float(t) for t in self.sample_times)
            if any(not 0 <= t <= self.horizon for t in ts):
                raise ValueError("sample times must lie in [0, horizon]")
            object.__setattr__(self, "sample_times", ts)

    @property
    def effective_burn_in(self) -> float:
        return 0.1 * self.horizon if self.burn_in is None else self.burn_in


@dataclass(frozen=True)
class GapOccupation:
    """Occupation times over the post-burn-in window.

    marginals[i, v] is the time gap i+1 spent at value v, with the top bin
    lumping all values >= occ_cap.  joint maps gap-state tuples (entries
    lumped at joint_cap) to times; pairs maps a gap-label pair (g, h) with
    g < h to its lumped two-dimensional table.  Either map may be None when
    the system was too large to track it.
    """

    total_time: float
    occ_cap: int
    marginals: np.ndarray
    joint: dict[tuple[int, ...], float] | None = None
    joint_cap: int | None = None
    pairs: dict[tuple[int, int], np.ndarray] | None = None
    pair_cap: int | None = None


@dataclass(frozen=True)
class SimStats:
    """Everything a run produced.

    displacement[i] = X_i(horizon) - X_i(0).  excursions is a float array
    with one (Y_k, kappa_k) row per completed excursion of the gap vector
    between visits to the all-zero state: the leftmost particle's
    displacement over the excursion and its duration.  snapshots, when
    sampling was requested, is (times, positions) with positions[k] the
    strictly increasing particle positions at times[k].
    """

    final_positions: np.ndarray
    displacement: np.ndarray
    gap_occupation: GapOccupation
    event_count: int
    excursions: np.ndarray
    snapshots: tuple[np.ndarray, np.ndarray] | None = None
    meta: dict = field(default_factory=dict)


def _generator(seed: int, replica: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replica,))
    return np.random.Generator(np.random.PCG64(ss))


def _decode_joint(keys, vals, n_gaps: int, base: int):
    out: dict[tuple[int, ...], float] = {}
    for k, v in zip(keys.tolist(), vals.tolist()):
        digits = []
        for _ in range(n_gaps):
            k, d = divmod(k, base)
            digits.append(d)
        out[tuple(digits)] = v
    return out


def simulate(rates: RateSystem, cfg: SimConfig) -> SimStats:
    """Run the chain once; fully determined by (rates, cfg)."""
    N = rates.n_gaps
    if cfg.initial_gaps is None:
        z0 = np.zeros(N, dtype=np.int64)
    else:
        if len(cfg.initial_gaps) != N:
            raise ValueError(f"need {N} initial gaps, got {len(cfg.initial_gaps)}")
        z0 = np.asarray(cfg.initial_gaps, dtype=np.int64)

    track_joint = cfg.track_joint
    if track_joint is None:
        track_joint = 1 <= N <= _JOINT_MAX_GAPS
    track_pairs = cfg.track_pairs
    if track_pairs is None:
        n_pairs = N * (N - 1) // 2
        track_pairs = N >= 2 and n_pairs * (cfg.pair_cap + 1) ** 2 <= _PAIR_CELL_BUDGET

    if cfg.sample_times is None:
        sample_times = np.empty(0, dtype=np.float64)
    else:
        sample_times = np.sort(np.asarray(cfg.sample_times, dtype=np.float64))

    x1_0 = 1
    gen = _generator(cfg.seed, cfg.replica)

    from . import _kernel

    (z, x1, disp, occ, joint_keys, joint_vals, pair_occ, events,
     exc_y, exc_k, snap) = _kernel.run_chain(
        rates.a, rates.b, z0, x1_0, float(cfg.horizon),
        float(cfg.effective_burn_in), cfg.occ_cap,
        track_joint, cfg.joint_cap, track_pairs, cfg.pair_cap,
        sample_times, gen)

    final = np.empty(N + 1, dtype=np.int64)
    final[0] = x1
    for i in range(N):
        final[i + 1] = final[i] + 1 + z[i]

    joint = None
    if track_joint:
        joint = _decode_joint(joint_keys, joint_vals, N, cfg.joint_cap + 1)
    pairs = None
    if track_pairs:
        pairs = {}
        idx = 0
        for i in range(N):
            for j in range(i + 1, N):
                pairs[(i + 1, j + 1)] = pair_occ[idx]
                idx += 1

    occupation = GapOccupation(
        total_time=cfg.horizon - cfg.effective_burn_in,
        occ_cap=cfg.occ_cap,
        marginals=occ,
        joint=joint,
        joint_cap=cfg.joint_cap if track_joint else None,
        pairs=pairs,
        pair_cap=cfg.pair_cap if track_pairs else None,
    )
    snapshots = None
    if sample_times.size:
        snapshots = (sample_times, snap)
    meta = {
        "seed": cfg.seed,
        "replica": cfg.replica,
        "rng": RNG_FAMILY,
        "horizon": cfg.horizon,
        "burn_in": cfg.effective_burn_in,
    }
    return SimStats(
        final_positions=final,
        displacement=disp,
        gap_occupation=occupation,
        event_count=int(events),
        excursions=np.column_stack([exc_y, exc_k]).astype(np.float64)
        if exc_y.size else np.empty((0, 2)),
        snapshots=snapshots,
        meta=meta,
    )


def run_replicas(rates: RateSystem, cfg: SimConfig,
                 replicas: int) -> tuple[SimStats, ...]:
    """Independent runs on replica streams 0..replicas-1 of cfg's seed."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    return tuple(
        simulate(rates, replace(cfg, replica=r)) for r in range(replicas)
    )


def empirical_speeds(stats: SimStats, horizon: float) -> np.ndarray:
    """Per-particle average velocity over the run: displacement / horizon."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return stats.displacement / horizon


@dataclass(frozen=True)
class EmpiricalGapLaw:
    """Occupation-time law over a subset of gaps, normalized to probabilities.

    marginals maps each selected gap label to its pmf vector (top bin lumped);
    joint maps state tuples in gap-label order to probabilities when a joint
    or pairwise record was available for the selection, else None.
    """

    gaps: tuple[int, ...]
    total_time: float
    marginals: dict[int, np.ndarray]
    joint: dict[tuple[int, ...], float] | None


def empirical_gap_law(stats: SimStats, gaps=None) -> EmpiricalGapLaw:
    """Normalize accumulated occupation times into a distribution."""
    occ = stats.gap_occupation
    n_gaps = occ.marginals.shape[0]
    if gaps is None:
        gaps = tuple(range(1, n_gaps + 1))
    gaps = tuple(int(g) for g in gaps)
    if not gaps or sorted(set(gaps)) != list(gaps):
        raise ValueError("gap selection must be non-empty, sorted, distinct")
    if gaps[0] < 1 or gaps[-1] > n_gaps:
        raise ValueError(f"gap labels must lie in 1..{n_gaps}")
    T = occ.total_time
    if T <= 0:
        raise ValueError("no accumulation window: burn_in swallowed the run")

    marginals = {g: occ.marginals[g - 1] / T for g in gaps}
    joint: dict[tuple[int, ...], float] | None = None
    if occ.joint is not None:
        agg: dict[tuple[int, ...], float] = {}
        idxs = [g - 1 for g in gaps]
        for state, w in occ.joint.items():
            key = tuple(state[i] for i in idxs)
            agg[key] = agg.get(key, 0.0) + w
        joint = {k: w / T for k, w in agg.items()}
    elif len(gaps) == 2 and occ.pairs is not None:
        table = occ.pairs[(gaps[0], gaps[1])]
        joint = {
            (i, j): table[i, j] / T
            for i in range(table.shape[0])
            for j in range(table.shape[1])
            if table[i, j] > 0
        }
    elif len(gaps) == 1:
        joint = {(v,): p for v, p in enumerate(marginals[gaps[0]]) if p > 0}
    return EmpiricalGapLaw(gaps=gaps, total_time=T,
                           marginals=marginals, joint=joint)


def _require_single_cloud(rates: RateSystem) -> np.ndarray:
    """Interior loads of the whole system, provided it is one stable cloud."""
    part, _ = cloud_partition(rates)
    if len(part.parts) != 1:
        raise ValueError(
            "the system splits into several clouds; excursion returns to the "
            "packed state have infinite mean"
        )
    return interior_loads(rates, part.parts[0])


def excursion_rate(rates: RateSystem) -> float:
    """Long-run rate of completed excursions of a single-cloud system:

        alpha = (a_1 + b_{N+1}) prod_i (1 - rho_i)

    so excursion durations have mean 1/alpha.
    """
    rho = _require_single_cloud(rates)
    return float((rates.a[0] + rates.b[-1]) * np.prod(1.0 - rho))


def extract_excursions(rates: RateSystem, cfg: SimConfig) -> np.ndarray:
    """Run the chain and return its completed excursion records.

    Only meaningful for single-cloud systems (otherwise the gap vector
    escapes and returns stop coming).  Starting from the packed state is
    recommended so the first excursion begins at time zero.
    """
    _require_single_cloud(rates)
    return simulate(rates, cfg).excursions


def estimate_sigma2(excursions: np.ndarray, rates: RateSystem) -> float:
    """Central-limit variance from excursion records:

        sigma^2 = alpha * Var(Z),   Z_k = Y_k - v * kappa_k

    where v is the cloud speed and alpha the excursion rate, both analytic.
    The sample variance uses the unbiased normalization.
    """
    excursions = np.asarray(excursions, dtype=np.float64)
    if excursions.ndim != 2 or excursions.shape[1] != 2:
        raise ValueError("excursions must be an array of (Y, kappa) rows")
    if excursions.shape[0] < 2:
        raise ValueError("need at least two excursions to estimate a variance")
    alpha_rate = excursion_rate(rates)
    v = hv(rates, DiscreteInterval(1, rates.n_particles))
    z = excursions[:, 0] - v * excursions[:, 1]
    return float(alpha_rate * z.var(ddof=1))


def clt_constants_two_particle(rates: RateSystem) -> tuple[float, float]:
    """Closed-form (speed, variance) for a stable two-particle system.

    Requires N = 1 and strict stability a_1 + b_2 < a_2 + b_1 (the leader
    must outrun the chaser's free speed); both particles then satisfy the
    same central limit theorem with these constants:

        v = (b_1 b_2 - a_1 a_2) / (a_2 + b_1)
        sigma^2 = (a_1 a_2 + b_1 b_2) / (a_2 + b_1)
    """
    if rates.n_gaps != 1:
        raise ValueError("closed-form constants exist only for two particles")
    a1, a2 = rates.a
    b1, b2 = rates.b
    margin = (a2 + b1) - (a1 + b2)
    if margin <= TIE_TOL * max(1.0, a2 + b1, a1 + b2):
        raise ValueError(
            f"pair is not strictly stable: a1+b2 = {a1 + b2:.6g} is not "
            f"below a2+b1 = {a2 + b1:.6g}"
        )
    denom = a2 + b1
    return (b1 * b2 - a1 * a2) / denom, (a1 * a2 + b1 * b2) / denom
