"""Closed-form block quantities against independent brute-force evaluations.

The direct evaluators below expand the defining sums and products term by
term, sharing no code with the package's recurrences; agreement on random
instances pins the implementations to the definitions.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excloud import (
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


def alpha_direct(a, b, ell, m):
    """prod_{u=ell}^{ell+m-1} a_u/b_u, term by term (labels 1-based)."""
    out = 1.0
    for u in range(ell, ell + m):
        out *= a[u - 1] / b[u - 1]
    return out


def beta_direct(a, b, ell, m):
    """The defining double sum,

        (1/b_{ell+m-1}) sum_{v=0}^{m-1} prod_{u=1}^{v} a_{ell+m-u}/b_{ell+m-u-1},

    expanded literally instead of via the backward recurrence.
    """
    total = 0.0
    for v in range(m):
        term = 1.0 / b[ell + m - 2]
        for u in range(1, v + 1):
            term *= a[ell + m - u - 1] / b[ell + m - u - 2]
        total += term
    return total


def random_instance(rng, n_max=12):
    n = int(rng.integers(2, n_max + 1))
    a = rng.uniform(0.0, 2.0, n)
    a[rng.random(n) < 0.2] = 0.0
    b = rng.uniform(0.05, 2.0, n)
    return validate(a, b)


def random_interval(rng, n, min_m=1):
    m = int(rng.integers(min_m, n + 1))
    ell = int(rng.integers(1, n - m + 2))
    return DiscreteInterval(ell, m)


# ---------------------------------------------------------------- alpha, beta


def test_beta_matches_direct_double_sum():
    rng = np.random.default_rng(101)
    for _ in range(1000):
        rates = random_instance(rng)
        iv = random_interval(rng, rates.n_particles)
        want = beta_direct(rates.a, rates.b, iv.ell, iv.m)
        got = beta(rates, iv)
        assert got == pytest.approx(want, rel=1e-12)


def test_alpha_matches_direct_product():
    rng = np.random.default_rng(102)
    for _ in range(1000):
        rates = random_instance(rng)
        iv = random_interval(rng, rates.n_particles)
        want = alpha_direct(rates.a, rates.b, iv.ell, iv.m)
        got = alpha(rates, iv)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_alpha_is_multiplicative_over_splits():
    rng = np.random.default_rng(103)
    for _ in range(1000):
        rates = random_instance(rng)
        iv = random_interval(rng, rates.n_particles, min_m=2)
        k = int(rng.integers(1, iv.m))
        left = DiscreteInterval(iv.ell, k)
        right = DiscreteInterval(iv.ell + k, iv.m - k)
        assert alpha(rates, iv) == pytest.approx(
            alpha(rates, left) * alpha(rates, right), rel=1e-12, abs=1e-300
        )


def test_singleton_values():
    rates = validate([0.3, 0.8], [1.1, 0.9])
    one = DiscreteInterval(2, 1)
    assert alpha(rates, one) == pytest.approx(0.8 / 0.9, rel=1e-15)
    assert beta(rates, one) == pytest.approx(1.0 / 0.9, rel=1e-15)
    # singleton candidate speed is the free drift
    assert hv(rates, one) == pytest.approx(0.9 - 0.8, rel=1e-13)


def test_alpha_vanishes_with_a_zero_inside():
    rates = validate([0.5, 0.0, 0.5], [1.0, 1.0, 1.0])
    assert alpha(rates, DiscreteInterval(1, 3)) == 0.0
    assert alpha(rates, DiscreteInterval(1, 1)) == 0.5


@given(
    st.lists(
        st.tuples(
            st.one_of(st.just(0.0),
                      st.floats(min_value=1e-6, max_value=3.0)),
            st.floats(min_value=0.1, max_value=3.0),
        ),
        min_size=2,
        max_size=8,
    ),
    st.data(),
)
@settings(max_examples=200, deadline=None)
def test_beta_recurrence_property(pairs, data):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    rates = validate(a, b)
    n = rates.n_particles
    m = data.draw(st.integers(min_value=1, max_value=n))
    ell = data.draw(st.integers(min_value=1, max_value=n - m + 1))
    got = beta(rates, DiscreteInterval(ell, m))
    want = beta_direct(rates.a, rates.b, ell, m)
    assert got == pytest.approx(want, rel=1e-11)


# ------------------------------------------------------- speeds and loads


def test_dog_and_sheep_block_values():
    # one slow particle (label 1) ahead of four free ones
    rates = validate([0.2, 1, 1, 1, 1], [1, 1, 1, 1, 1])
    full = DiscreteInterval(1, 5)
    assert alpha(rates, full) == pytest.approx(0.2, rel=1e-15)
    assert beta(rates, full) == pytest.approx(5.0, rel=1e-15)
    assert hv(rates, full) == pytest.approx(0.16, rel=1e-13)
    for j in range(1, 5):
        assert hrho(rates, full, j) == pytest.approx(0.2 + 0.16 * j, rel=1e-13)
    loads = interior_loads(rates, full)
    np.testing.assert_allclose(loads, [0.36, 0.52, 0.68, 0.84], rtol=1e-13)


def test_two_slow_ends_symmetric_block_values():
    rates = validate([0.5, 1, 1, 1, 1, 1], [1, 1, 1, 1, 1, 0.5])
    full = DiscreteInterval(1, 6)
    assert alpha(rates, full) == pytest.approx(1.0, rel=1e-15)
    assert hv(rates, full) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(interior_loads(rates, full), [0.5] * 5,
                               rtol=1e-13)


def test_two_slow_ends_asymmetric_block_values():
    rates = validate([0.3, 1, 1], [1, 1, 0.7])
    full = DiscreteInterval(1, 3)
    assert hv(rates, full) == pytest.approx(0.4 / 3, rel=1e-13)
    np.testing.assert_allclose(
        interior_loads(rates, full),
        [0.3 + 0.4 / 3, 0.3 + 0.8 / 3],
        rtol=1e-13,
    )


def test_three_particle_speed_closed_form():
    a1, a2, a3 = 0.1, 0.5, 0.9
    b1, b2, b3 = 1.2, 1.0, 0.8
    rates = validate([a1, a2, a3], [b1, b2, b3])
    want = (b1 * b2 * b3 - a1 * a2 * a3) / (b1 * b2 + b1 * a3 + a2 * a3)
    assert hv(rates, DiscreteInterval(1, 3)) == pytest.approx(want, rel=1e-13)
    assert want == pytest.approx(0.915 / 2.73, rel=1e-15)


def test_three_particle_speed_closed_form_random():
    rng = np.random.default_rng(104)
    for _ in range(300):
        a1, a2, a3 = rng.uniform(0.0, 2.0, 3)
        b1, b2, b3 = rng.uniform(0.05, 2.0, 3)
        rates = validate([a1, a2, a3], [b1, b2, b3])
        want = (b1 * b2 * b3 - a1 * a2 * a3) / (b1 * b2 + b1 * a3 + a2 * a3)
        assert hv(rates, DiscreteInterval(1, 3)) == pytest.approx(
            want, rel=1e-12, abs=1e-13
        )


def test_load_normalizes_at_the_right_edge():
    # alpha(ell;m) + beta(ell;m) hv = 1: the load profile ends exactly at 1
    rng = np.random.default_rng(105)
    for _ in range(1000):
        rates = random_instance(rng)
        iv = random_interval(rng, rates.n_particles)
        val = alpha(rates, iv) + beta(rates, iv) * hv(rates, iv)
        assert val == pytest.approx(1.0, rel=1e-11)


def test_hrho_rejects_non_interior_gaps():
    rates = validate([0.2, 1, 1], [1, 1, 1])
    full = DiscreteInterval(1, 3)
    with pytest.raises(ValueError, match="not interior"):
        hrho(rates, full, 3)
    with pytest.raises(ValueError, match="no interior gaps"):
        hrho(rates, DiscreteInterval(2, 1), 2)


def test_interior_loads_match_hrho():
    rng = np.random.default_rng(106)
    for _ in range(200):
        rates = random_instance(rng)
        iv = random_interval(rng, rates.n_particles, min_m=2)
        vals = interior_loads(rates, iv)
        for k, j in enumerate(iv.interior_gaps):
            assert vals[k] == pytest.approx(hrho(rates, iv, j), rel=1e-12)


# ------------------------------------------------------------ rate systems


def test_validate_rejects_bad_shapes_and_signs():
    with pytest.raises(ValueError, match="differ in length"):
        validate([1.0, 1.0], [1.0])
    with pytest.raises(ValueError, match="at least two"):
        validate([1.0], [1.0])
    with pytest.raises(ValueError, match="negative"):
        validate([-0.1, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match=r"b\[2\] must be positive"):
        validate([0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ValueError, match="not finite"):
        validate([np.inf, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="not finite"):
        validate([0.5, 1.0], [1.0, np.nan])


def test_validate_rejects_extreme_log_ratios():
    with pytest.raises(ValueError, match="too extreme"):
        validate([1e290, 1e290], [1e-290, 1e-290])


def test_rate_arrays_are_frozen():
    rates = validate([0.2, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        rates.a[0] = 5.0


def test_reflect_is_an_involution():
    rng = np.random.default_rng(107)
    for _ in range(100):
        rates = random_instance(rng)
        back = reflect(reflect(rates))
        np.testing.assert_array_equal(back.a, rates.a)
        np.testing.assert_array_equal(back.b, rates.b)


def test_reflect_swaps_and_reverses():
    rates = validate([0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
    r = reflect(rates)
    np.testing.assert_allclose(r.a, [3.0, 2.0, 1.0])
    np.testing.assert_allclose(r.b, [0.3, 0.2, 0.1])
    assert r.assumption == "A"


def test_reflect_tags_zero_right_rates():
    rates = validate([0.0, 1.0], [1.0, 1.0])
    r = reflect(rates)
    assert r.assumption == "A-prime"
    with pytest.raises(ValueError, match="reflect"):
        hv(r, DiscreteInterval(1, 2))


# ------------------------------------------- intervals and partitions


def test_interval_basics():
    iv = DiscreteInterval(3, 4)
    assert iv.last == 6
    assert list(iv.labels) == [3, 4, 5, 6]
    assert list(iv.interior_gaps) == [3, 4, 5]
    assert 3 in iv and 6 in iv and 7 not in iv
    assert repr(iv) == "[3;4]"
    with pytest.raises(ValueError):
        DiscreteInterval(1, 0)
    with pytest.raises(ValueError):
        DiscreteInterval(0, 2)


def test_block_formulas_reject_out_of_range_interval():
    rates = validate([0.2, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="exceeds"):
        beta(rates, DiscreteInterval(2, 2))


def test_partition_contiguity_is_enforced():
    with pytest.raises(ValueError, match="start at label 1"):
        OrderedPartition((DiscreteInterval(2, 2),))
    with pytest.raises(ValueError, match="not contiguous"):
        OrderedPartition((DiscreteInterval(1, 2), DiscreteInterval(4, 1)))
    with pytest.raises(ValueError, match="at least one part"):
        OrderedPartition(())


def test_partition_constructors_and_boundaries():
    p = partition_from_sizes([2, 1, 3])
    assert p.n_particles == 6
    assert p.boundary_gaps == (2, 3)
    assert repr(p) == "({1,2},{3},{4,5,6})"
    s = singleton_partition(3)
    assert len(s) == 3
    assert s.boundary_gaps == (1, 2)
    assert repr(s) == "({1},{2},{3})"


# ------------------------------------------------ product-geometric law


def test_pmf_sums_to_one_minus_exact_tail():
    rng = np.random.default_rng(108)
    for _ in range(50):
        rhos = rng.uniform(0.05, 0.9, int(rng.integers(1, 5)))
        law = GeometricProductLaw(rhos)
        # box small enough to enumerate; the tail identity is exact at any cap
        cap = {1: 400, 2: 60, 3: 12, 4: 8}[law.k]
        grids = np.meshgrid(*[np.arange(cap + 1)] * law.k, indexing="ij")
        states = np.stack([g.ravel() for g in grids], axis=1)
        total = sum(product_geometric_pmf(law, z) for z in states)
        want = np.prod(1.0 - rhos ** (cap + 1))
        assert total == pytest.approx(want, rel=1e-10)


def test_pmf_single_point_values():
    law = GeometricProductLaw([0.25, 0.5])
    assert product_geometric_pmf(law, [0, 0]) == pytest.approx(0.375, rel=1e-15)
    assert product_geometric_pmf(law, [2, 1]) == pytest.approx(
        0.25**2 * 0.75 * 0.5 * 0.5, rel=1e-14
    )


def test_pmf_input_validation():
    law = GeometricProductLaw([0.3, 0.6])
    with pytest.raises(ValueError, match="length"):
        product_geometric_pmf(law, [1])
    with pytest.raises(ValueError, match="non-negative integers"):
        product_geometric_pmf(law, [-1, 0])
    with pytest.raises(ValueError, match="non-negative integers"):
        product_geometric_pmf(law, [0.5, 1.0])


def test_law_rejects_unstable_parameters():
    with pytest.raises(ValueError, match="outside"):
        GeometricProductLaw([0.5, 1.0])
    with pytest.raises(ValueError, match="outside"):
        GeometricProductLaw([0.0])
    with pytest.raises(ValueError, match="non-empty"):
        GeometricProductLaw([])


def test_expected_width_golden_and_monte_carlo_free():
    law = GeometricProductLaw([0.36, 0.52, 0.68, 0.84])
    assert expected_cloud_width(law) == pytest.approx(625 / 48, rel=1e-12)
    # cross-check by direct series summation
    direct = 0.0
    for r in law.rhos:
        direct += sum((z + 1) * (1 - r) * r**z for z in range(2000))
    assert expected_cloud_width(law) == pytest.approx(direct, rel=1e-9)
