"""Domain types and closed-form quantities for the heterogeneous exclusion process.

The model is a finite system of N+1 ordered particles on the integer lattice.
Particle i carries its own left-jump rate a_i and right-jump rate b_i; a jump
onto an occupied site is suppressed, so the left-to-right order never changes.
Everything observable about the long-run behaviour of the system is built from
two scalar functions of a discrete interval I = [ell; m] of particle labels:

    alpha(ell; m) = prod_{u=ell}^{ell+m-1} a_u / b_u
    beta(ell; m)  = (1/b_{ell+m-1}) sum_{v=0}^{m-1} prod_{u=1}^{v}
                        a_{ell+m-u} / b_{ell+m-u-1}

The candidate speed of the block I is hv(I) = (1 - alpha(I)) / beta(I), and the
interior gap loads are hrho(I, j) = alpha(ell; j+1-ell) + beta(ell; j+1-ell) *
hv(I).  A block whose interior loads are all below one travels as a single
"cloud" whose gaps settle into a product of geometric laws; those laws and
their expected spans are also provided here.

Conventions used throughout the package: particles are labelled 1..N+1 and gaps
1..N, gap i sitting between particles i and i+1.  Empty products are 1 and
empty sums are 0.  All arithmetic is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .partition import MergeTrace

# Relative tolerance for floating-point ties in formula identities.  All the
# closed forms are short rational expressions of the inputs, so anything that
# survives a 1e-12 relative band is a genuine inequality.
TIE_TOL = 1e-12

# validate() rejects rate systems whose log-ratio mass could push an interval
# product outside the double range (exp(+-600) is still comfortably finite).
_LOG_RATIO_BUDGET = 600.0


def _readonly(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RateSystem:
    """Jump rates of the N+1 particles.

    a[i] and b[i] (0-based storage) are the left and right rates of particle
    i+1.  Instances built through validate() satisfy the standing assumption
    0 <= a_i < inf, 0 < b_i < inf.  reflect() may produce systems where some
    b_i = 0; these carry assumption="A-prime" and are accepted only where the
    reversed-order reading makes sense.
    """

    a: np.ndarray
    b: np.ndarray
    assumption: str = "A"

    def __post_init__(self):
        object.__setattr__(self, "a", _readonly(self.a))
        object.__setattr__(self, "b", _readonly(self.b))
        if self.a.ndim != 1 or self.b.ndim != 1:
            raise ValueError("rate vectors must be one-dimensional")
        if self.a.shape != self.b.shape:
            raise ValueError(
                f"rate vectors differ in length: {self.a.size} vs {self.b.size}"
            )
        if self.a.size < 2:
            raise ValueError("need at least two particles (N >= 1)")
        if not np.all(np.isfinite(self.a)):
            i = int(np.flatnonzero(~np.isfinite(self.a))[0])
            raise ValueError(f"a[{i + 1}] is not finite")
        if not np.all(np.isfinite(self.b)):
            i = int(np.flatnonzero(~np.isfinite(self.b))[0])
            raise ValueError(f"b[{i + 1}] is not finite")
        if np.any(self.a < 0):
            i = int(np.flatnonzero(self.a < 0)[0])
            raise ValueError(f"a[{i + 1}] = {self.a[i]} is negative")
        if np.any(self.b < 0):
            i = int(np.flatnonzero(self.b < 0)[0])
            raise ValueError(f"b[{i + 1}] = {self.b[i]} is negative")
        if self.assumption not in ("A", "A-prime"):
            raise ValueError(f"unknown assumption tag {self.assumption!r}")
        if self.assumption == "A" and np.any(self.b == 0):
            i = int(np.flatnonzero(self.b == 0)[0])
            raise ValueError(f"b[{i + 1}] must be positive")
        if self.assumption == "A-prime" and np.any(self.b == 0) and np.any(self.a == 0):
            raise ValueError("reversed system needs all a_i > 0 or all b_i > 0")

    @property
    def n_particles(self) -> int:
        return self.a.size

    @property
    def n_gaps(self) -> int:
        return self.a.size - 1

    def rate_a(self, label: int) -> float:
        """Left rate of particle `label` (1-based)."""
        return float(self.a[label - 1])

    def rate_b(self, label: int) -> float:
        return float(self.b[label - 1])

    def __repr__(self):
        return f"RateSystem(a={self.a.tolist()}, b={self.b.tolist()})"


def validate(a, b) -> RateSystem:
    """Build a RateSystem, enforcing the standing rate assumption.

    Checks lengths, finiteness, a_i >= 0, b_i > 0, and that the log-ratio mass
    sum_{a_u > 0} |log(a_u/b_u)| stays within the double-precision budget, so
    no interval product can overflow or underflow downstream.
    """
    rates = RateSystem(a, b)
    # a/b may overflow to inf here; the budget check below rejects exactly
    # those systems, so the intermediate overflow is expected
    with np.errstate(over="ignore"):
        ratios = np.divide(rates.a, rates.b, out=np.ones_like(rates.a),
                           where=rates.a > 0)
    mass = float(np.abs(np.log(ratios)).sum())
    if mass > _LOG_RATIO_BUDGET:
        raise ValueError(
            f"rates too extreme: sum |log(a_i/b_i)| = {mass:.1f} exceeds "
            f"{_LOG_RATIO_BUDGET:.0f}; interval products would leave the "
            "double-precision range"
        )
    return rates


def reflect(rates: RateSystem) -> RateSystem:
    """The same system traversed right to left.

    Particle i of the result is old particle N+2-i with its jump directions
    swapped: a'_i = b_{N+2-i}, b'_i = a_{N+2-i}.  If the original has some
    a_i = 0 the result has zero right rates and is tagged "A-prime"; it is an
    involution either way.
    """
    a2 = rates.b[::-1]
    b2 = rates.a[::-1]
    tag = "A" if np.all(b2 > 0) else "A-prime"
    return RateSystem(a2, b2, assumption=tag)


@dataclass(frozen=True)
class DiscreteInterval:
    """The label block [ell; m] = {ell, ..., ell+m-1}, 1-based, m >= 1."""

    ell: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"interval length must be >= 1, got {self.m}")
        if self.ell < 1:
            raise ValueError(f"interval must start at a 1-based label, got {self.ell}")

    @property
    def last(self) -> int:
        return self.ell + self.m - 1

    @property
    def labels(self) -> range:
        return range(self.ell, self.ell + self.m)

    @property
    def interior_gaps(self) -> range:
        """Gap labels strictly inside the block: ell .. ell+m-2."""
        return range(self.ell, self.ell + self.m - 1)

    def __contains__(self, label: int) -> bool:
        return self.ell <= label <= self.last

    def __repr__(self):
        return f"[{self.ell};{self.m}]"


def _check_bounds(rates: RateSystem, iv: DiscreteInterval):
    if rates.assumption != "A":
        raise ValueError(
            "block formulas divide by the right rates and need all b_i > 0; "
            "reflect() output with zero right rates cannot be analysed directly"
        )
    if iv.last > rates.n_particles:
        raise ValueError(
            f"interval {iv} exceeds the particle range [1; {rates.n_particles}]"
        )


@dataclass(frozen=True)
class OrderedPartition:
    """Contiguous ordered decomposition of the particle labels 1..N+1."""

    parts: tuple[DiscreteInterval, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ValueError("partition needs at least one part")
        if parts[0].ell != 1:
            raise ValueError("partition must start at label 1")
        for left, right in zip(parts, parts[1:]):
            if right.ell != left.last + 1:
                raise ValueError(
                    f"parts {left} and {right} are not contiguous"
                )

    @property
    def n_particles(self) -> int:
        return self.parts[-1].last

    @property
    def boundary_gaps(self) -> tuple[int, ...]:
        """Gap labels separating consecutive parts (the last label of every
        part except the final one)."""
        return tuple(p.last for p in self.parts[:-1])

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __repr__(self):
        inner = ",".join(
            "{" + ",".join(str(u) for u in p.labels) + "}" for p in self.parts
        )
        return f"({inner})"


def singleton_partition(n_particles: int) -> OrderedPartition:
    return OrderedPartition(tuple(DiscreteInterval(i, 1) for i in range(1, n_particles + 1)))


def partition_from_sizes(sizes) -> OrderedPartition:
    """Convenience constructor: OrderedPartition from part lengths."""
    parts = []
    ell = 1
    for m in sizes:
        parts.append(DiscreteInterval(ell, int(m)))
        ell += int(m)
    return OrderedPartition(tuple(parts))


def alpha(rates: RateSystem, iv: DiscreteInterval) -> float:
    """prod_{u in I} a_u/b_u.  Zero as soon as the block contains a_u = 0."""
    _check_bounds(rates, iv)
    sl = slice(iv.ell - 1, iv.last)
    return float(np.prod(rates.a[sl] / rates.b[sl]))


def beta(rates: RateSystem, iv: DiscreteInterval) -> float:
    """The second block coefficient, computed by the backward recurrence

        beta(ell; 1) = 1/b_ell
        beta(ell; m) = 1/b_{ell+m-1} + (a_{ell+m-1}/b_{ell+m-1}) beta(ell; m-1)

    which expands to the defining sum with fewer multiplications and no long
    products of near-cancelling ratios.
    """
    _check_bounds(rates, iv)
    a, b = rates.a, rates.b
    val = 1.0 / b[iv.ell - 1]
    for u in range(iv.ell + 1, iv.last + 1):
        val = (1.0 + a[u - 1] * val) / b[u - 1]
    return float(val)


def _beta_profile(rates: RateSystem, iv: DiscreteInterval) -> np.ndarray:
    """beta(ell; k) for k = 1..m in one sweep (shares the recurrence above)."""
    a, b = rates.a, rates.b
    out = np.empty(iv.m)
    val = 1.0 / b[iv.ell - 1]
    out[0] = val
    for k in range(1, iv.m):
        u = iv.ell + k
        val = (1.0 + a[u - 1] * val) / b[u - 1]
        out[k] = val
    return out


def _alpha_profile(rates: RateSystem, iv: DiscreteInterval) -> np.ndarray:
    """alpha(ell; k) for k = 1..m via a cumulative product."""
    sl = slice(iv.ell - 1, iv.last)
    return np.cumprod(rates.a[sl] / rates.b[sl])


def hv(rates: RateSystem, iv: DiscreteInterval) -> float:
    """Candidate speed of the block: (1 - alpha(I)) / beta(I).

    For a singleton this collapses to b_ell - a_ell, the free drift of the
    particle.
    """
    return (1.0 - alpha(rates, iv)) / beta(rates, iv)


def hrho(rates: RateSystem, iv: DiscreteInterval, j: int) -> float:
    """Interior load of gap j inside block I:

        hrho_I(j) = alpha(ell; j+1-ell) + beta(ell; j+1-ell) * hv(I)

    defined for j in the interior gap range of I (so I needs length >= 2).
    """
    if iv.m < 2:
        raise ValueError(f"block {iv} has no interior gaps")
    if j not in iv.interior_gaps:
        raise ValueError(
            f"gap {j} is not interior to {iv} "
            f"(interior gaps are {iv.ell}..{iv.last - 1})"
        )
    k = DiscreteInterval(iv.ell, j + 1 - iv.ell)
    return alpha(rates, k) + beta(rates, k) * hv(rates, iv)


def interior_loads(rates: RateSystem, iv: DiscreteInterval) -> np.ndarray:
    """All interior loads of a block at once; empty for singletons.

    Same values as hrho(rates, iv, j) over j in iv.interior_gaps, computed in
    a single alpha/beta sweep.
    """
    _check_bounds(rates, iv)
    if iv.m < 2:
        return np.empty(0)
    speed = hv(rates, iv)
    al = _alpha_profile(rates, iv)[: iv.m - 1]
    be = _beta_profile(rates, iv)[: iv.m - 1]
    return al + be * speed


@dataclass(frozen=True)
class GeometricProductLaw:
    """Joint law of a cloud's interior gaps: independent geometrics.

    rhos holds one parameter per interior gap, each strictly inside (0,1); the
    pmf at z is prod_j rhos[j]^{z_j} (1 - rhos[j]).
    """

    rhos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rhos", _readonly(self.rhos))
        if self.rhos.ndim != 1 or self.rhos.size == 0:
            raise ValueError("need a non-empty vector of gap parameters")
        if np.any(self.rhos <= 0) or np.any(self.rhos >= 1):
            bad = int(np.flatnonzero((self.rhos <= 0) | (self.rhos >= 1))[0])
            raise ValueError(
                f"rho[{bad}] = {self.rhos[bad]} is outside (0,1); "
                "the law exists only for strictly stable gaps"
            )

    @property
    def k(self) -> int:
        return self.rhos.size


def product_geometric_pmf(law: GeometricProductLaw, z) -> float:
    """Probability of the gap vector z under the product-geometric law."""
    z = np.asarray(z)
    if z.shape != law.rhos.shape:
        raise ValueError(
            f"gap vector has length {z.size}, law has {law.rhos.size} components"
        )
    if np.any(z < 0) or not np.issubdtype(z.dtype, np.integer):
        raise ValueError("gap values must be non-negative integers")
    return float(np.prod(law.rhos**z * (1.0 - law.rhos)))


def expected_cloud_width(law: GeometricProductLaw) -> float:
    """Limiting expected span (rightmost minus leftmost position) of a cloud.

    Each interior gap contributes its mean plus the occupied site:
    E[eta_j] + 1 = 1/(1 - rho_j).
    """
    return float(np.sum(1.0 / (1.0 - law.rhos)))


@dataclass(frozen=True)
class CloudReport:
    """Complete analytical picture of a rate system's long-run behaviour.

    rho holds one load per gap: the geometric parameter (< 1) on the interior
    gaps of each part, a value >= 1 on the gaps separating parts.  stationary
    and expected_widths are aligned with the parts of the partition, with None
    in singleton slots (a lone particle has no interior gaps).  clt carries
    the (speed, variance) pair of the central limit theorem when it is
    available in closed form, i.e. for a stable pair of particles.  ties
    lists boundary gap labels at which the analysis sits inside the numerical
    tie band and the exact classification is unresolved.
    """

    partition: OrderedPartition
    rho: np.ndarray
    speeds: np.ndarray
    cloud_speeds: tuple[float, ...]
    stationary: tuple[GeometricProductLaw | None, ...]
    expected_widths: tuple[float | None, ...]
    flags: dict[str, bool]
    clt: tuple[float, float] | None = None
    ties: tuple[int, ...] = ()
    trace: MergeTrace | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho", _readonly(self.rho))
        object.__setattr__(self, "speeds", _readonly(self.speeds))
        n = self.partition.n_particles
        if self.rho.size != n - 1 or self.speeds.size != n:
            raise ValueError("rho/speeds sizes do not match the partition")
        k = len(self.partition.parts)
        if not (len(self.cloud_speeds) == len(self.stationary)
                == len(self.expected_widths) == k):
            raise ValueError("per-part fields must align with the partition")
