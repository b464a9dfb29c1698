"""Merging procedure, full load profiles, particle speeds, and the
self-consistency of the resulting cloud reports."""

import numpy as np
import pytest

from excloud import (
    DiscreteInterval,
    GeometricProductLaw,
    MERGE_POLICIES,
    analyze,
    check_partition,
    cloud_partition,
    full_loads,
    hv,
    interior_loads,
    particle_speeds,
    partition_from_sizes,
    reflect,
    singleton_partition,
    solve_general_traffic,
    to_jackson,
    validate,
)

from conftest import make_random_rates


def sizes(partition):
    return tuple(p.m for p in partition)


# ------------------------------------------------------------- goldens


def test_dog_and_sheep_single_cloud():
    rates = validate([0.2, 1, 1, 1, 1], [1, 1, 1, 1, 1])
    part, trace = cloud_partition(rates)
    assert sizes(part) == (5,)
    assert trace.n_merges == 4
    rho = full_loads(rates, part)
    np.testing.assert_allclose(rho, [0.36, 0.52, 0.68, 0.84], rtol=1e-13)
    v = particle_speeds(rates, rho)
    np.testing.assert_allclose(v, [0.16] * 5, rtol=1e-12)


def test_two_slow_ends_symmetric_single_cloud():
    rates = validate([0.5, 1, 1, 1, 1, 1], [1, 1, 1, 1, 1, 0.5])
    report = analyze(rates)
    assert sizes(report.partition) == (6,)
    np.testing.assert_allclose(report.rho, [0.5] * 5, rtol=1e-13)
    np.testing.assert_allclose(report.speeds, np.zeros(6), atol=1e-14)
    assert report.expected_widths[0] == pytest.approx(10.0, rel=1e-12)
    assert report.flags["single_cloud"]
    assert not report.flags["all_speeds_positive"]
    assert not report.flags["critical_tie"]


def test_two_slow_ends_asymmetric_single_cloud():
    rates = validate([0.3, 1, 1], [1, 1, 0.7])
    report = analyze(rates)
    assert sizes(report.partition) == (3,)
    np.testing.assert_allclose(report.rho, [0.3 + 0.4 / 3, 0.3 + 0.8 / 3],
                               rtol=1e-13)
    np.testing.assert_allclose(report.speeds, [0.4 / 3] * 3, rtol=1e-12)
    assert report.flags["all_speeds_positive"]


def test_two_cloud_split_with_loads_and_speeds():
    rates = validate([0.0, 0.0, 0.0], [2.0, 1.0, 1.5])
    report = analyze(rates)
    assert sizes(report.partition) == (2, 1)
    np.testing.assert_allclose(report.rho, [0.5, 1.5], rtol=1e-13)
    np.testing.assert_allclose(report.speeds, [1.0, 1.0, 1.5], rtol=1e-13)
    assert report.cloud_speeds[0] == pytest.approx(1.0, rel=1e-13)
    assert report.cloud_speeds[1] == pytest.approx(1.5, rel=1e-13)
    assert report.stationary[0].rhos == pytest.approx([0.5])
    assert report.stationary[1] is None
    assert report.expected_widths[0] == pytest.approx(2.0, rel=1e-12)
    assert report.expected_widths[1] is None


def test_two_cloud_split_other_order():
    rates = validate([0.0, 0.0, 0.0], [1.0, 2.0, 1.5])
    report = analyze(rates)
    assert sizes(report.partition) == (1, 2)
    np.testing.assert_allclose(report.speeds, [1.0, 1.5, 1.5], rtol=1e-13)


def test_all_singletons_when_drifts_increase():
    rates = validate([0.5, 0.3, 0.1], [0.6, 0.7, 0.8])
    report = analyze(rates)
    assert sizes(report.partition) == (1, 1, 1)
    assert report.flags["all_singletons"]
    np.testing.assert_allclose(report.rho, [4 / 3, 1.375], rtol=1e-13)
    np.testing.assert_allclose(report.speeds, [0.1, 0.4, 0.7], rtol=1e-13)
    assert report.stationary == (None, None, None)
    assert report.expected_widths == (None, None, None)


# ------------------------------------------------------------ the trace


def test_trace_structure_single_merge():
    rates = validate([0.0, 0.0, 0.0], [2.0, 1.0, 1.5])
    _, trace = cloud_partition(rates)
    steps = trace.steps
    assert len(steps) == 3
    start, merge, stop = steps
    assert start.iteration == 0 and start.merged is None
    assert sizes(start.partition) == (1, 1, 1)
    assert start.speeds == pytest.approx((2.0, 1.0, 1.5))
    assert merge.iteration == 1 and merge.merged == 0
    assert sizes(merge.partition) == (2, 1)
    assert merge.speeds == pytest.approx((1.0, 1.5))
    assert stop.merged is None and stop.iteration == 2
    assert stop.partition == merge.partition


def test_trace_chain_merge_shares_iteration():
    # strictly decreasing free drifts: both pairs flagged in the first scan,
    # the simultaneous policy chains them into one cloud
    rates = validate([0.0, 0.0, 0.0], [0.9, 0.5, 0.1])
    part, trace = cloud_partition(rates, merge_policy="all")
    assert sizes(part) == (3,)
    merge_steps = [s for s in trace.steps if s.merged is not None]
    assert len(merge_steps) == 2
    assert merge_steps[0].iteration == merge_steps[1].iteration == 1
    assert merge_steps[0].merged == 1
    assert merge_steps[1].merged == 0
    assert trace.steps[-1].merged is None


def test_trace_leftmost_policy_one_merge_per_iteration():
    rates = validate([0.0, 0.0, 0.0], [0.9, 0.5, 0.1])
    part, trace = cloud_partition(rates, merge_policy="leftmost")
    assert sizes(part) == (3,)
    merge_steps = [s for s in trace.steps if s.merged is not None]
    assert [s.iteration for s in merge_steps] == [1, 2]


def test_unknown_policy_rejected():
    rates = validate([0.2, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="merge policy"):
        cloud_partition(rates, merge_policy="fastest")


def test_policies_agree_on_random_instances():
    rng = np.random.default_rng(301)
    for k in range(300):
        rates = make_random_rates(rng)
        results = {
            policy: cloud_partition(rates, merge_policy=policy,
                                    policy_seed=k)[0]
            for policy in MERGE_POLICIES
        }
        baseline = results["all"]
        assert all(p == baseline for p in results.values())


def test_random_policy_is_seed_deterministic():
    rates = validate([0.0] * 5, [1.5, 0.4, 1.2, 0.3, 2.0])
    t1 = cloud_partition(rates, merge_policy="random", policy_seed=7)[1]
    t2 = cloud_partition(rates, merge_policy="random", policy_seed=7)[1]
    assert [s.merged for s in t1.steps] == [s.merged for s in t2.steps]


# ----------------------------------------------------- loads and speeds


def test_full_loads_rejects_wrong_partition():
    # the pair is stable, so keeping the particles apart puts the boundary
    # load strictly below 1
    rates = validate([0.2, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="not the cloud partition"):
        full_loads(rates, singleton_partition(2))


def test_full_loads_rejects_mismatched_size():
    rates = validate([0.2, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="does not cover"):
        full_loads(rates, singleton_partition(3))


def test_boundary_loads_match_traffic_fixed_point():
    # the clamped balance at boundary gaps is the same equation the general
    # traffic solve settles; the two routes must agree on every gap
    rng = np.random.default_rng(302)
    checked_boundaries = 0
    for _ in range(300):
        rates = make_random_rates(rng)
        report = analyze(rates)
        if report.flags["critical_tie"]:
            continue
        sol = solve_general_traffic(to_jackson(rates))
        np.testing.assert_allclose(report.rho, sol.rho, rtol=1e-8, atol=1e-10)
        checked_boundaries += len(report.partition.boundary_gaps)
    assert checked_boundaries > 100


def test_particle_speeds_golden_and_errors():
    rates = validate([0.5, 0.3, 0.1], [0.6, 0.7, 0.8])
    v = particle_speeds(rates, [4 / 3, 1.375])
    np.testing.assert_allclose(v, [0.1, 0.4, 0.7], rtol=1e-13)
    with pytest.raises(ValueError, match="one load per gap"):
        particle_speeds(rates, [1.0])
    flat = validate([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError, match="non-decreasing"):
        particle_speeds(flat, [2.0, 0.5])


def test_speed_jump_identity_at_boundary_gaps():
    # v_{i+1} - v_i = (rho_i - 1)^+ (b_i + a_{i+1}) for every gap
    rng = np.random.default_rng(303)
    for _ in range(500):
        rates = make_random_rates(rng)
        report = analyze(rates)
        if report.flags["critical_tie"]:
            continue
        jump = np.diff(report.speeds)
        excess = np.maximum(report.rho - 1.0, 0.0)
        want = excess * (rates.b[:-1] + rates.a[1:])
        np.testing.assert_allclose(jump, want, rtol=1e-9, atol=1e-11)


def test_cloud_speeds_equal_particle_speeds_within_parts():
    rng = np.random.default_rng(304)
    for _ in range(300):
        rates = make_random_rates(rng)
        report = analyze(rates)
        if report.flags["critical_tie"]:
            continue
        for part, cspeed in zip(report.partition, report.cloud_speeds):
            for label in part.labels:
                assert report.speeds[label - 1] == pytest.approx(
                    cspeed, rel=1e-9, abs=1e-11
                )


def test_interior_loads_of_parts_are_stable():
    rng = np.random.default_rng(305)
    for _ in range(300):
        rates = make_random_rates(rng)
        report = analyze(rates)
        if report.flags["critical_tie"]:
            continue
        for part in report.partition:
            assert np.all(interior_loads(rates, part) < 1.0)
        for g in report.partition.boundary_gaps:
            assert report.rho[g - 1] >= 1.0 - 1e-9


def test_all_speeds_positive_iff_min_speed_positive():
    rng = np.random.default_rng(306)
    for _ in range(500):
        rates = make_random_rates(rng)
        report = analyze(rates)
        vmin = report.speeds.min()
        if abs(vmin) < 1e-9:
            continue
        assert report.flags["all_speeds_positive"] == (vmin > 0)


def test_all_singletons_iff_free_drifts_nondecreasing():
    rng = np.random.default_rng(307)
    for _ in range(500):
        rates = make_random_rates(rng)
        drift = rates.b - rates.a
        gaps = np.diff(drift)
        if np.any(np.abs(gaps) < 1e-9):
            continue
        report = analyze(rates)
        assert report.flags["all_singletons"] == bool(np.all(gaps > 0))


def test_stability_means_every_prefix_outruns_the_whole():
    # in a single cloud each leading block's candidate speed exceeds the
    # cloud speed; that is the stability reading of rho_i < 1
    rng = np.random.default_rng(308)
    found = 0
    while found < 100:
        rates = make_random_rates(rng, max_particles=6)
        report = analyze(rates)
        if report.flags["critical_tie"] or not report.flags["single_cloud"]:
            continue
        found += 1
        n = rates.n_particles
        v_full = hv(rates, DiscreteInterval(1, n))
        band = 1e-12 * max(1.0, abs(v_full))
        for i in range(1, n):
            assert hv(rates, DiscreteInterval(1, i)) > v_full - band


# ------------------------------------------------------ reflection


def test_reflection_reverses_the_partition():
    rng = np.random.default_rng(309)
    for _ in range(300):
        rates = make_random_rates(rng, positive_only=True)
        report = analyze(rates)
        if report.flags["critical_tie"]:
            continue
        mirror = analyze(reflect(rates))
        assert sizes(mirror.partition) == sizes(report.partition)[::-1]
        np.testing.assert_allclose(mirror.speeds, -report.speeds[::-1],
                                   rtol=1e-9, atol=1e-11)
        np.testing.assert_allclose(
            mirror.cloud_speeds, [-v for v in report.cloud_speeds[::-1]],
            rtol=1e-9, atol=1e-11,
        )


# ---------------------------------------------------------- criticality


def test_equal_free_drifts_are_a_critical_tie():
    report = analyze(validate([0.0, 0.0], [1.0, 1.0]))
    assert report.flags["critical_tie"]
    assert report.ties == (1,)
    assert sizes(report.partition) == (1, 1)
    assert report.clt is None


def test_equal_drifts_further_right_tie_there():
    # free drifts 0.2, 0.5, 0.5: nothing merges, particles 2|3 tie exactly
    report = analyze(validate([0.3, 0.1, 0.1], [0.5, 0.6, 0.6]))
    assert sizes(report.partition) == (1, 1, 1)
    assert report.flags["critical_tie"]
    assert 2 in report.ties


def test_near_tie_outside_band_is_clean():
    report = analyze(validate([0.0, 0.0], [1.0, 1.0 + 1e-9]))
    assert not report.flags["critical_tie"]
    assert sizes(report.partition) == (1, 1)


# ------------------------------------------------------ check_partition


def test_check_partition_golden_examples():
    rates = validate([0.0, 0.0, 0.0], [2.0, 1.0, 1.5])
    assert check_partition(rates, partition_from_sizes([2, 1]))
    assert not check_partition(rates, partition_from_sizes([3]))
    assert not check_partition(rates, partition_from_sizes([1, 2]))
    assert not check_partition(rates, partition_from_sizes([1, 1, 1]))
    assert not check_partition(rates, partition_from_sizes([2, 1, 1]))


def test_check_partition_accepts_stable_pair_whole():
    rates = validate([0.2, 1.0], [1.0, 1.0])
    assert check_partition(rates, partition_from_sizes([2]))
    assert not check_partition(rates, partition_from_sizes([1, 1]))


def test_check_partition_confirms_the_procedure():
    rng = np.random.default_rng(310)
    for _ in range(200):
        rates = make_random_rates(rng)
        report = analyze(rates)
        if report.flags["critical_tie"]:
            continue
        assert check_partition(rates, report.partition)


# ------------------------------------------------------- report shape


def test_report_alignment_and_flags():
    rates = validate([0.2, 1, 1, 1, 1], [1, 1, 1, 1, 1])
    report = analyze(rates)
    assert len(report.cloud_speeds) == len(report.partition)
    assert len(report.stationary) == len(report.partition)
    assert isinstance(report.stationary[0], GeometricProductLaw)
    assert report.rho.size == 4 and report.speeds.size == 5
    assert report.flags["single_cloud"]
    assert report.flags["all_speeds_positive"]
    assert report.trace is not None
    assert report.clt is None  # closed form needs exactly two particles


def test_report_clt_for_stable_pair():
    report = analyze(validate([0.2, 1.0], [1.0, 1.0]))
    assert report.clt is not None
    v, s2 = report.clt
    assert v == pytest.approx(0.4, rel=1e-13)
    assert s2 == pytest.approx(0.6, rel=1e-13)
