import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stochastic_pf.cones import ConeSpec, Functional, default_functional, sample_section
from stochastic_pf.errors import BoundaryPoint, DimensionMismatch, NoAdmissibleSample, NotInCone
from stochastic_pf.hilbert import (
    MetricContext,
    bisection_ratios,
    diameter,
    distance,
    lower_ratio,
    norm_comparison_bound,
    norm_comparison_estimate,
    orthant_distance_closed_form,
    upper_ratio,
)

positive_vectors = arrays(np.float64, (3,), elements=st.floats(min_value=1e-3, max_value=1e3))


@pytest.fixture
def ctx2():
    return MetricContext.for_cone(ConeSpec.orthant(2))


def test_context_rejects_boundary_functional():
    with pytest.raises(NotInCone):
        MetricContext(ConeSpec.orthant(2), Functional(np.array([1.0, 0.0])))


def test_context_rejects_wrong_shape():
    with pytest.raises(DimensionMismatch):
        MetricContext(ConeSpec.orthant(2), Functional(np.ones(3)))


# ============================================================================
# Ratios
# ============================================================================

def test_ratio_examples(ctx2):
    assert upper_ratio(ctx2, [1.0, 1.0], [1.0, 1.0]) == 1.0
    assert lower_ratio(ctx2, [1.0, 1.0], [1.0, 1.0]) == 1.0
    assert upper_ratio(ctx2, [2.0, 1.0], [1.0, 1.0]) == 2.0
    assert lower_ratio(ctx2, [2.0, 1.0], [1.0, 1.0]) == 1.0
    assert lower_ratio(ctx2, [0.0, 1.0], [1.0, 1.0]) == 0.0
    assert upper_ratio(ctx2, [0.0, 0.0], [1.0, 1.0]) == 0.0


def test_ratio_needs_interior_reference(ctx2):
    with pytest.raises(BoundaryPoint):
        upper_ratio(ctx2, [1.0, 1.0], [0.0, 1.0])


def test_ratio_rejects_points_outside(ctx2):
    with pytest.raises(NotInCone):
        upper_ratio(ctx2, [1.0, -1.0], [1.0, 1.0])


def test_bisection_matches_ratio_examples():
    upper, lower = bisection_ratios(ConeSpec.orthant(2), [2.0, 1.0], [1.0, 1.0])
    assert upper == pytest.approx(2.0, rel=1e-12)
    assert lower == pytest.approx(1.0, rel=1e-12)


# ============================================================================
# Distance
# ============================================================================

def test_distance_examples(ctx2):
    assert distance(ctx2, [1.0, 2.0], [1.0, 2.0]) == 0.0
    assert distance(ctx2, [1.0, 2.0], [2.0, 1.0]) == pytest.approx(math.log(4.0), rel=1e-14)
    assert distance(ctx2, [1.0, 2.0], [3.0, 6.0]) == pytest.approx(0.0, abs=1e-15)


def test_boundary_gives_infinity_outside_gives_error(ctx2):
    assert distance(ctx2, [0.0, 1.0], [1.0, 1.0]) == math.inf
    assert distance(ctx2, [1.0, 1.0], [1.0, 0.0]) == math.inf
    with pytest.raises(NotInCone):
        distance(ctx2, [1.0, -0.5], [1.0, 1.0])


def test_closed_form_examples():
    assert orthant_distance_closed_form([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]) == 0.0
    assert orthant_distance_closed_form([1.0, 2.0], [2.0, 1.0]) == pytest.approx(1.386294, abs=1e-6)
    assert orthant_distance_closed_form([4.0, 1.0], [1.0, 1.0]) == pytest.approx(math.log(4.0))
    with pytest.raises(NotInCone):
        orthant_distance_closed_form([1.0, 0.0], [1.0, 1.0])


@settings(max_examples=300, deadline=None)
@given(x=positive_vectors, y=positive_vectors)
def test_generic_path_matches_closed_form(x, y):
    ctx = MetricContext.for_cone(ConeSpec.orthant(3))
    assert distance(ctx, x, y) == pytest.approx(orthant_distance_closed_form(x, y), rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(x=positive_vectors, y=positive_vectors)
def test_distance_is_exactly_symmetric(x, y):
    ctx = MetricContext.for_cone(ConeSpec.orthant(3))
    assert distance(ctx, x, y) == distance(ctx, y, x)


@settings(max_examples=300, deadline=None)
@given(x=positive_vectors, y=positive_vectors,
       lam=st.floats(min_value=1e-3, max_value=1e3), mu=st.floats(min_value=1e-3, max_value=1e3))
def test_distance_is_projective(x, y, lam, mu):
    ctx = MetricContext.for_cone(ConeSpec.orthant(3))
    d = distance(ctx, x, y)
    assert abs(distance(ctx, lam * x, mu * y) - d) <= 1e-12 * max(d, 1.0)


@pytest.mark.parametrize("cone", [
    ConeSpec.orthant(3),
    ConeSpec.simplicial([[1.0, 0.3, 0.2], [0.1, 1.0, 0.4], [0.2, 0.1, 1.0]]),
    ConeSpec.polyhedral([[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]]),
])
def test_metric_axioms_on_random_triples(cone, rng):
    ctx = MetricContext.for_cone(cone)
    X, Y, Z = (sample_section(cone, ctx.phi, rng, 2000) for _ in range(3))
    for x, y, z in zip(X, Y, Z):
        dxy = distance(ctx, x, y)
        assert dxy >= 0.0
        assert dxy <= distance(ctx, x, z) + distance(ctx, z, y) + 1e-10


@pytest.mark.parametrize("cone", [
    ConeSpec.simplicial([[1.0, 0.3, 0.2], [0.1, 1.0, 0.4], [0.2, 0.1, 1.0]]),
    ConeSpec.polyhedral([[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]]),
])
def test_facet_formula_matches_bisection_oracle(cone, rng):
    ctx = MetricContext.for_cone(cone)
    X = sample_section(cone, ctx.phi, rng, 300)
    Y = sample_section(cone, ctx.phi, rng, 300)
    for x, y in zip(X, Y):
        upper, lower = bisection_ratios(cone, x, y)
        assert abs(math.log(upper / lower) - distance(ctx, x, y)) <= 1e-9


def test_distance_tends_to_zero_along_converging_sequence(ctx2):
    x = np.array([0.3, 0.7])
    gaps = [distance(ctx2, x + 0.5 ** k * np.array([0.1, -0.1]), x) for k in range(1, 40)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-10


# ============================================================================
# Diameter and norm comparison
# ============================================================================

def test_diameter_is_largest_pairwise_distance(ctx2):
    points = np.array([[0.5, 0.5], [0.2, 0.8], [0.8, 0.2]])
    assert diameter(ctx2, points) == pytest.approx(distance(ctx2, points[1], points[2]))
    assert diameter(ctx2, points[:1]) == 0.0
    assert diameter(ctx2, np.array([[0.5, 0.5], [0.0, 1.0]])) == math.inf


def test_norm_comparison_single_pair(ctx2):
    x, y = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    assert distance(ctx2, x, y) == pytest.approx(math.log(3.0))
    assert norm_comparison_bound(ctx2, [(x, y)]) == pytest.approx(0.25 / 2.0)


def test_norm_comparison_needs_a_usable_pair(ctx2):
    x = np.array([0.5, 0.5])
    with pytest.raises(NoAdmissibleSample):
        norm_comparison_bound(ctx2, [(x, x), (x, x)])


def test_norm_comparison_estimate_is_stable(ctx2):
    first = norm_comparison_estimate(ctx2, 10_000, 1)
    second = norm_comparison_estimate(ctx2, 10_000, 2)
    assert 0.0 < first < math.inf
    assert abs(first - second) <= 0.2 * max(first, second)
    with pytest.raises(ValueError):
        norm_comparison_estimate(ctx2, 1, 0)


def test_norm_comparison_holds_on_fresh_samples(rng):
    cone = ConeSpec.simplicial([[1.0, 0.3], [0.2, 1.0]])
    ctx = MetricContext(cone, default_functional(cone))
    bound = norm_comparison_estimate(ctx, 5000, 11)
    X = sample_section(cone, ctx.phi, rng, 500)
    W = sample_section(cone, ctx.phi, rng, 500)
    for x, w in zip(X, W):
        d = distance(ctx, x, w)
        assert np.abs(x - w).max() <= 1.5 * bound * math.expm1(d) + 1e-15
