"""Long-run behaviour of finite heterogeneous exclusion processes on the
integer lattice: cloud decomposition, speeds, stationary gap laws, central
limit constants, plus an exact simulator and brute-force verification oracles.
"""

__version__ = "0.1.0"

from .core import (
    CloudReport,
    DiscreteInterval,
    GeometricProductLaw,
    OrderedPartition,
    RateSystem,
    alpha,
    beta,
    expected_cloud_width,
    hrho,
    hv,
    interior_loads,
    partition_from_sizes,
    product_geometric_pmf,
    reflect,
    singleton_partition,
    validate,
)
from .jackson import (
    JacksonParams,
    TrafficSolution,
    reduced_params,
    solve_general_traffic,
    solve_stable_traffic,
    to_jackson,
)
from .partition import (
    MERGE_POLICIES,
    MergeStep,
    MergeTrace,
    analyze,
    check_partition,
    cloud_partition,
    full_loads,
    particle_speeds,
    speed_ties,
)
from .simulate import (
    RNG_FAMILY,
    EmpiricalGapLaw,
    GapOccupation,
    SimConfig,
    SimStats,
    clt_constants_two_particle,
    empirical_gap_law,
    empirical_speeds,
    estimate_sigma2,
    excursion_rate,
    extract_excursions,
    run_replicas,
    simulate,
)
from .verify import (
    CheckResult,
    SimBudget,
    TruncatedChainSpec,
    VerificationReport,
    geometric_bins,
    partition_oracle,
    truncated_marginal,
    truncated_stationary,
    tv_distance,
    verify_instance,
)

__all__ = [
    "__version__",
    "CloudReport",
    "DiscreteInterval",
    "GeometricProductLaw",
    "OrderedPartition",
    "RateSystem",
    "alpha",
    "beta",
    "expected_cloud_width",
    "hrho",
    "hv",
    "interior_loads",
    "partition_from_sizes",
    "product_geometric_pmf",
    "reflect",
    "singleton_partition",
    "validate",
    "JacksonParams",
    "TrafficSolution",
    "reduced_params",
    "solve_general_traffic",
    "solve_stable_traffic",
    "to_jackson",
    "MERGE_POLICIES",
    "MergeStep",
    "MergeTrace",
    "analyze",
    "check_partition",
    "cloud_partition",
    "full_loads",
    "particle_speeds",
    "speed_ties",
    "RNG_FAMILY",
    "EmpiricalGapLaw",
    "GapOccupation",
    "SimConfig",
    "SimStats",
    "clt_constants_two_particle",
    "empirical_gap_law",
    "empirical_speeds",
    "estimate_sigma2",
    "excursion_rate",
    "extract_excursions",
    "run_replicas",
    "simulate",
    "CheckResult",
    "SimBudget",
    "TruncatedChainSpec",
    "VerificationReport",
    "geometric_bins",
    "partition_oracle",
    "truncated_marginal",
    "truncated_stationary",
    "tv_distance",
    "verify_instance",
]
