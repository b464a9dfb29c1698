"""Compiled inner loops: the CTMC event kernel and the traffic fixed point.

Everything here is numba-compiled with on-disk caching, so the first call in a
fresh environment pays a one-time compile and later processes start hot.  The
module is imported lazily by its callers to keep pure-analysis code paths free
of the numba import cost.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict


@njit(cache=True)
def traffic_fixed_point(lam, mu, pl, pr, nu0, tol, max_iter):
    """Iterate nu <- (nu ^ mu) P + lambda until the sup-norm step is < tol.

    pl and pr are full-length routing vectors: pl[j] = P_{j,j-1} (pl[0] = 0)
    and pr[j] = P_{j,j+1} (pr[n-1] = 0), 0-based queues.  Returns the final
    iterate, the number of applications of the map, and the last step size.
    """
    n = lam.shape[0]
    nu = nu0.copy()
    new = np.empty(n)
    steps = 0
    last = np.inf
    while steps < max_iter:
        last = 0.0
        for j in range(n):
            v = lam[j]
            if j >= 1:
                x = nu[j - 1]
                if mu[j - 1] < x:
                    x = mu[j - 1]
                v += x * pr[j - 1]
            if j <= n - 2:
                x = nu[j + 1]
                if mu[j + 1] < x:
                    x = mu[j + 1]
                v += x * pl[j + 1]
            new[j] = v
            d = abs(v - nu[j])
            if d > last:
                last = d
        steps += 1
        tmp = nu
        nu = new
        new = tmp
        if last < tol:
            break
    return nu, steps, last


@njit(cache=True)
def run_chain(a, b, z0, x1_0, horizon, burn_in, occ_cap, track_joint,
              joint_cap, track_pairs, pair_cap, sample_times, gen):
    """Simulate the particle system exactly, event by event.

    State is the gap vector z (length N) plus the absolute position x1 of the
    leftmost particle.  Particle p (0-based) jumps left at rate a[p] when its
    left gap is open (always for p = 0) and right at rate b[p] when its right
    gap is open (always for p = N).  Holding times are exponential in the
    total enabled rate; the move is chosen proportionally.

    Bookkeeping, all restricted to the window [burn_in, horizon]:
      - per-gap occupation times, values lumped at occ_cap;
      - joint occupation keyed by sum_i min(z_i, joint_cap) (joint_cap+1)^i
        when track_joint;
      - pairwise occupation tables over gap pairs when track_pairs, values
        lumped at pair_cap;
    plus, over the whole run: per-particle displacement counts, excursions of
    z between visits to the all-zero state (leftmost displacement and
    duration), and position snapshots at the given sorted sample times.
    """
    n = a.shape[0]
    N = n - 1
    z = z0.copy()
    x1 = x1_0
    disp = np.zeros(n, np.int64)
    occ = np.zeros((N, occ_cap + 1), np.float64)
    n_pairs = N * (N - 1) // 2 if track_pairs else 0
    pair_occ = np.zeros((n_pairs, pair_cap + 1, pair_cap + 1), np.float64)
    joint = Dict.empty(types.int64, types.float64)
    rates = np.empty(2 * n, np.float64)
    ns = sample_times.shape[0]
    snap = np.zeros((ns, n), np.int64)
    sp = 0

    exc_cap = 1024
    exc_y = np.empty(exc_cap, np.int64)
    exc_k = np.empty(exc_cap, np.float64)
    n_exc = 0
    in_exc = True
    for i in range(N):
        if z[i] != 0:
            in_exc = False
            break
    tau_t = 0.0
    tau_x1 = x1

    t = 0.0
    events = np.int64(0)
    while True:
        R = 0.0
        for p in range(n):
            r = a[p] if (p == 0 or z[p - 1] >= 1) else 0.0
            rates[2 * p] = r
            R += r
            r = b[p] if (p == N or z[p] >= 1) else 0.0
            rates[2 * p + 1] = r
            R += r
        if R <= 0.0:
            raise RuntimeError("no enabled move; rate assumption violated")
        t_next = t + gen.exponential(1.0 / R)

        while sp < ns and sample_times[sp] < t_next:
            x = x1
            snap[sp, 0] = x
            for i in range(N):
                x += 1 + z[i]
                snap[sp, i + 1] = x
            sp += 1

        hi = t_next if t_next < horizon else horizon
        lo = t if t > burn_in else burn_in
        w = hi - lo
        if w > 0.0:
            for i in range(N):
                v = z[i]
                occ[i, v if v < occ_cap else occ_cap] += w
            if track_joint:
                key = np.int64(0)
                mul = np.int64(1)
                for i in range(N):
                    v = z[i]
                    if v > joint_cap:
                        v = joint_cap
                    key += v * mul
                    mul *= joint_cap + 1
                if key in joint:
                    joint[key] += w
                else:
                    joint[key] = w
            if track_pairs:
                idx = 0
                for i in range(N):
                    vi = z[i] if z[i] < pair_cap else pair_cap
                    for j in range(i + 1, N):
                        vj = z[j] if z[j] < pair_cap else pair_cap
                        pair_occ[idx, vi, vj] += w
                        idx += 1
        if t_next >= horizon:
            break
        t = t_next

        u = gen.random() * R
        c = 0.0
        ch = 2 * n - 1
        for k in range(2 * n):
            c += rates[k]
            if u < c:
                ch = k
                break
        p = ch // 2
        if ch % 2 == 0:
            if p >= 1:
                z[p - 1] -= 1
                if z[p - 1] < 0:
                    raise RuntimeError("order violation: negative gap")
            if p <= N - 1:
                z[p] += 1
            disp[p] -= 1
            if p == 0:
                x1 -= 1
        else:
            if p <= N - 1:
                z[p] -= 1
                if z[p] < 0:
                    raise RuntimeError("order violation: negative gap")
            if p >= 1:
                z[p - 1] += 1
            disp[p] += 1
            if p == 0:
                x1 += 1
        events += 1

        at_zero = True
        for i in range(N):
            if z[i] != 0:
                at_zero = False
                break
        if at_zero:
            if in_exc:
                if n_exc >= exc_cap:
                    exc_cap *= 2
                    ny = np.empty(exc_cap, np.int64)
                    nk = np.empty(exc_cap, np.float64)
                    ny[:n_exc] = exc_y[:n_exc]
                    nk[:n_exc] = exc_k[:n_exc]
                    exc_y = ny
                    exc_k = nk
                exc_y[n_exc] = x1 - tau_x1
                exc_k[n_exc] = t - tau_t
                n_exc += 1
            in_exc = True
            tau_t = t
            tau_x1 = x1

    while sp < ns and sample_times[sp] <= horizon:
        x = x1
        snap[sp, 0] = x
        for i in range(N):
            x += 1 + z[i]
            snap[sp, i + 1] = x
        sp += 1

    n_keys = len(joint)
    joint_keys = np.empty(n_keys, np.int64)
    joint_vals = np.empty(n_keys, np.float64)
    idx = 0
    for k, v in joint.items():
        joint_keys[idx] = k
        joint_vals[idx] = v
        idx += 1

    return (z, x1, disp, occ, joint_keys, joint_vals, pair_occ, events,
            exc_y[:n_exc].copy(), exc_k[:n_exc].copy(), snap)
