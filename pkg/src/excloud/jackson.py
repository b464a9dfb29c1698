"""Queueing-network dual of the gap process.

The vector of inter-particle gaps is itself a Markov chain, and it is exactly
an open network of N exponential queues in tandem-with-backflow: gap i is a
queue with service rate mu_i = b_i + a_{i+1}, customers routed left with
probability b_i/mu_i and right with probability a_{i+1}/mu_i, and exogenous
arrivals feeding the two ends.  Long-run behaviour of the particle system is
decided by the throughput (traffic) equations of this network:

    stable form    nu (I - P) = lambda          (linear, tridiagonal)
    general form   nu = (nu ^ mu) P + lambda    (nonlinear, unique solution)

where ^ is the componentwise minimum.  The loads rho_i = nu_i/mu_i split the
gaps into tight ones (rho < 1) and diverging ones (rho >= 1), which is the
whole story behind the cloud decomposition.

The stable system is solved exactly by Thomas elimination; the general one by
the monotone fixed-point iteration from nu = lambda, which increases towards
the unique solution and is run in a compiled kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TIE_TOL, DiscreteInterval, RateSystem


@dataclass(frozen=True)
class JacksonParams:
    """Arrival rates, service rates and routing of the gap network.

    Queues are the gaps of a (sub)system; first_gap is the 1-based label of
    queue 0 so reduced sub-networks keep their global gap labels.  p_left[k]
    is the left-routing probability of queue k+1 (0-based), i.e. P_{i,i-1} for
    i = 2..n; p_right[k] is P_{i,i+1} for i = 1..n-1.  Both are empty when
    n = 1.
    """

    n: int
    lam: np.ndarray
    mu: np.ndarray
    p_left: np.ndarray
    p_right: np.ndarray
    first_gap: int = 1

    def __post_init__(self):
        for name in ("lam", "mu", "p_left", "p_right"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.n < 1:
            raise ValueError("need at least one queue")
        if self.lam.size != self.n or self.mu.size != self.n:
            raise ValueError("lambda and mu must have one entry per queue")
        if self.p_left.size != self.n - 1 or self.p_right.size != self.n - 1:
            raise ValueError("routing vectors must have n-1 entries")
        if np.any(self.mu <= 0):
            raise ValueError("service rates must be positive")
        if np.any(self.lam < 0):
            raise ValueError("arrival rates must be non-negative")

    @property
    def gap_labels(self) -> range:
        return range(self.first_gap, self.first_gap + self.n)


@dataclass(frozen=True)
class TrafficSolution:
    """Throughputs and loads of a traffic equation.

    stable_set holds the (global) gap labels with rho < 1 - tol; critical_set
    the labels with |rho - 1| <= tol, separated out because the dichotomy
    rho < 1 versus rho >= 1 is an exact-arithmetic statement that floating
    point cannot settle inside the band.
    """

    nu: np.ndarray
    rho: np.ndarray
    stable_set: frozenset[int]
    critical_set: frozenset[int]
    residual: float
    iterations: int
    first_gap: int = 1

    def __post_init__(self):
        for name in ("nu", "rho"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _classify(nu, mu, first_gap, tol):
    rho = nu / mu
    labels = np.arange(first_gap, first_gap + rho.size)
    stable = frozenset(int(g) for g in labels[rho < 1.0 - tol])
    critical = frozenset(int(g) for g in labels[np.abs(rho - 1.0) <= tol])
    return rho, stable, critical


def to_jackson(rates: RateSystem) -> JacksonParams:
    """Map particle rates to the gap network parameters.

    mu_i = b_i + a_{i+1} for every gap.  Arrivals enter only at the edges:
    lambda_1 = a_1 and lambda_N = b_{N+1} (summed into a single entry when
    N = 1, where the lone gap sees both end particles).
    """
    a, b = rates.a, rates.b
    n = rates.n_gaps
    mu = b[:-1] + a[1:]
    lam = np.zeros(n)
    if n == 1:
        lam[0] = a[0] + b[1]
    else:
        lam[0] = a[0]
        lam[-1] = b[-1]
    p_left = b[1:-1] / mu[1:]       # P_{i,i-1}, i = 2..N
    p_right = a[1:-1] / mu[:-1]     # P_{i,i+1}, i = 1..N-1
    return JacksonParams(n=n, lam=lam, mu=mu, p_left=p_left, p_right=p_right)


def reduced_params(rates: RateSystem, iv: DiscreteInterval) -> JacksonParams:
    """Gap network of the sub-system spanned by the particle block I.

    Queues are the interior gaps of I.  Service rates and routing keep their
    global formulas; arrivals collapse onto the edge gaps: for |I| = 2 the
    single queue receives a_ell + b_{ell+1}, otherwise a_ell enters at the
    left edge and b_{ell+m-1} at the right edge.  With I = [1; N+1] this is
    exactly to_jackson(rates).
    """
    if iv.m < 2:
        raise ValueError(f"block {iv} has no interior gaps, no reduced network")
    if iv.last > rates.n_particles:
        raise ValueError(f"block {iv} exceeds the particle range")
    a, b = rates.a, rates.b
    lo, hi = iv.ell - 1, iv.last - 1        # 0-based particle indices
    n = iv.m - 1
    mu = b[lo:hi] + a[lo + 1 : hi + 1]
    lam = np.zeros(n)
    if n == 1:
        lam[0] = a[lo] + b[hi]
    else:
        lam[0] = a[lo]
        lam[-1] = b[hi]
    p_left = b[lo + 1 : hi] / mu[1:]
    p_right = a[lo + 1 : hi] / mu[:-1]
    return JacksonParams(n=n, lam=lam, mu=mu, p_left=p_left,
                         p_right=p_right, first_gap=iv.ell)


def solve_stable_traffic(params: JacksonParams, tol: float = TIE_TOL) -> TrafficSolution:
    """Solve nu (I - P) = lambda exactly.

    The transposed system is tridiagonal (queue j receives only from j-1 and
    j+1), so a single Thomas elimination sweep suffices.  The solution is
    returned whether or not it is a stable operating point; the loads tell.
    """
    n = params.n
    lam, mu = params.lam, params.mu
    # Row j of the transposed system: nu_j - P_{j-1,j} nu_{j-1} - P_{j+1,j} nu_{j+1} = lam_j
    lower = -params.p_right            # coefficient of nu_{j-1} in row j
    upper = -params.p_left             # coefficient of nu_{j+1} in row j
    diag = np.ones(n)
    c = np.empty(n)                    # modified upper band
    d = np.empty(n)                    # modified rhs
    piv = diag[0]
    c[0] = upper[0] / piv if n > 1 else 0.0
    d[0] = lam[0] / piv
    for j in range(1, n):
        piv = diag[j] - lower[j - 1] * c[j - 1]
        if abs(piv) < 1e-14:
            raise ValueError("stable traffic system is numerically singular")
        c[j] = upper[j] / piv if j < n - 1 else 0.0
        d[j] = (lam[j] - lower[j - 1] * d[j - 1]) / piv
    nu = np.empty(n)
    nu[-1] = d[-1]
    for j in range(n - 2, -1, -1):
        nu[j] = d[j] - c[j] * nu[j + 1]
    rho, stable, critical = _classify(nu, mu, params.first_gap, tol)
    resid = _stable_residual(params, nu)
    return TrafficSolution(nu=nu, rho=rho, stable_set=stable,
                           critical_set=critical, residual=resid,
                           iterations=0, first_gap=params.first_gap)


def _stable_residual(params: JacksonParams, nu) -> float:
    n = params.n
    out = nu - params.lam
    if n > 1:
        out[1:] -= nu[:-1] * params.p_right
        out[:-1] -= nu[1:] * params.p_left
    return float(np.abs(out).max())


def _general_residual(params: JacksonParams, nu) -> float:
    clipped = np.minimum(nu, params.mu)
    out = nu - params.lam
    if params.n > 1:
        out[1:] -= clipped[:-1] * params.p_right
        out[:-1] -= clipped[1:] * params.p_left
    return float(np.abs(out).max())


def solve_general_traffic(params: JacksonParams, tol: float = 1e-12,
                          max_iter: int = 10**6,
                          nu0: np.ndarray | None = None) -> TrafficSolution:
    """Solve nu = (nu ^ mu) P + lambda by monotone fixed-point iteration.

    Starting from nu = lambda the map is componentwise non-decreasing and
    bounded above by the all-clamped affine image, so the iterates converge to
    the unique solution; iteration stops when the sup-norm step falls below
    tol.  nu0 overrides the starting point (used by the uniqueness probes).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    from . import _kernel

    n = params.n
    start = params.lam if nu0 is None else np.asarray(nu0, dtype=np.float64)
    if start.size != n:
        raise ValueError("starting point has wrong length")
    pl = np.concatenate(([0.0], params.p_left))    # P_{j,j-1}, full length
    pr = np.concatenate((params.p_right, [0.0]))   # P_{j,j+1}, full length
    nu, steps, last_step = _kernel.traffic_fixed_point(
        np.ascontiguousarray(params.lam), np.ascontiguousarray(params.mu),
        pl, pr, np.ascontiguousarray(start, dtype=np.float64),
        float(tol), int(max_iter))
    resid = _general_residual(params, nu)
    if last_step >= tol:
        raise ValueError(
            f"traffic fixed point did not converge in {max_iter} iterations "
            f"(last step {last_step:.3e}, residual {resid:.3e})"
        )
    rho, stable, critical = _classify(nu, params.mu, params.first_gap, tol)
    return TrafficSolution(nu=nu, rho=rho, stable_set=stable,
                           critical_set=critical, residual=resid,
                           iterations=steps, first_gap=params.first_gap)
