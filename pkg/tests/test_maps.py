import math

import numpy as np
import pytest

from stochastic_pf.cones import ConeSpec, Functional, default_functional, interior_contains, contains
from stochastic_pf.errors import ConfigError, DegenerateCone, MapAnnihilates, NotInCone
from stochastic_pf.maps import (
    MapFamily,
    MapInstance,
    MonotoneClass,
    apply,
    check_homogeneity,
    check_nonexpansive,
    check_superadditivity,
    classify_monotonicity,
    map_from_config,
    normalized_apply,
)

ONES2 = Functional(np.ones(2))


def _positive(seed, n=3):
    return MapInstance.linear_positive(np.random.default_rng(seed).uniform(0.5, 2.0, size=(n, n)))


def _power_mean(seed, n=3, p=0.5):
    return MapInstance.power_mean(np.random.default_rng(seed).uniform(0.5, 2.0, size=(n, n)), p)


def _leontief(seed, n=3):
    return MapInstance.leontief_min(np.random.default_rng(seed).uniform(0.5, 2.0, size=(n, n)))


def _conjugated(seed, n=3):
    rng = np.random.default_rng(seed)
    cone_in = ConeSpec.simplicial(np.eye(n) + 0.2 * rng.uniform(size=(n, n)))
    cone_out = ConeSpec.simplicial(np.eye(n) + 0.2 * rng.uniform(size=(n, n)))
    return MapInstance.simplicial_conjugated(rng.uniform(0.5, 2.0, size=(n, n)), cone_in, cone_out)


def _broken():
    cone = ConeSpec.orthant(2)
    return MapInstance.custom(lambda x: x + 1.0, cone, cone)


# ============================================================================
# Evaluation
# ============================================================================

def test_apply_examples():
    assert np.allclose(apply(MapInstance.linear_positive([[1, 1], [1, 1]]), [1.0, 1.0]), [2.0, 2.0])
    assert np.allclose(apply(MapInstance.power_mean(np.eye(2), 0.5), [4.0, 9.0]), [4.0, 9.0])
    assert np.allclose(apply(MapInstance.leontief_min([[1, 2], [2, 1]]), [2.0, 2.0]), [1.0, 1.0])


def test_apply_rejects_points_outside_input_cone():
    with pytest.raises(NotInCone):
        apply(MapInstance.linear_positive([[1, 1], [1, 1]]), [1.0, -1.0])


def test_apply_survives_huge_inputs():
    out = apply(_power_mean(1), np.array([1e300, 1e300, 1e300]))
    assert np.all(np.isfinite(out))


def test_normalized_apply_examples():
    identity = MapInstance.linear_nonnegative(np.eye(2))
    assert np.allclose(normalized_apply(identity, ONES2, [0.25, 0.75]), [0.25, 0.75])
    out = normalized_apply(MapInstance.linear_positive([[2, 1], [1, 2]]), ONES2, [1.0, 0.0])
    assert np.allclose(out, [2 / 3, 1 / 3])
    assert abs(ONES2(out) - 1.0) <= 1e-14


def test_normalized_apply_reports_annihilation():
    with pytest.raises(MapAnnihilates) as info:
        normalized_apply(MapInstance.linear_nonnegative([[1, 0], [1, 0]]), ONES2, [0.0, 1.0])
    assert np.array_equal(info.value.witness, [0.0, 1.0])
    with pytest.raises(NotInCone):
        normalized_apply(MapInstance.linear_positive([[1, 1], [1, 1]]), ONES2, [0.0, 0.0])


def test_conjugated_map_matches_coordinate_form():
    map_ = _conjugated(4)
    x = map_.cone_in.generators @ np.array([0.3, 1.2, 0.7])
    expected = map_.cone_out.generators @ (map_.matrix @ np.linalg.solve(map_.cone_in.generators, x))
    got = apply(map_, x)
    assert np.abs(got - expected).max() <= 1e-10 * np.abs(expected).max()
    for g in map_.cone_in.generators.T:
        assert interior_contains(map_.cone_out, apply(map_, g))


def test_constructors_validate_parameters():
    with pytest.raises(DegenerateCone):
        MapInstance.linear_positive([[1, 0], [1, 1]])
    with pytest.raises(DegenerateCone):
        MapInstance.power_mean(np.eye(2), 1.5)
    with pytest.raises(DegenerateCone):
        MapInstance.leontief_min([[1, 0], [1, 1]])
    with pytest.raises(DegenerateCone):
        MapInstance(MapFamily.POWER_MEAN, ConeSpec.simplicial([[1, 0.2], [0, 1]]), ConeSpec.orthant(2),
                    MonotoneClass.MONOTONE, np.eye(2), 0.5)


def test_map_from_config():
    map_ = map_from_config({"family": "power_mean", "C": [[1, 2], [2, 1]], "p": 0.5})
    assert map_.family is MapFamily.POWER_MEAN
    assert map_.declared_class is MonotoneClass.STRICTLY_MONOTONE
    with pytest.raises(ConfigError) as info:
        map_from_config({"family": "linear_positive"})
    assert info.value.field == "map.A"
    with pytest.raises(ConfigError):
        map_from_config({"family": "topical"})


# ============================================================================
# Homogeneity and monotonicity
# ============================================================================

@pytest.mark.parametrize("map_", [_positive(0), _power_mean(1), _leontief(2), _conjugated(3),
                                  _power_mean(5, p=0.2), _power_mean(6, p=1.0)])
def test_families_are_homogeneous(map_):
    report = check_homogeneity(map_, 200, 7)
    assert report.passed
    assert report.max_deviation <= 1e-10


def test_broken_map_fails_homogeneity_with_witness():
    report = check_homogeneity(_broken(), 50, 0)
    assert not report.passed
    assert report.witness is not None
    assert report.witness["deviation"] > 1e-10


def test_positive_matrix_is_strictly_monotone():
    report = classify_monotonicity(_positive(0), 100, 0)
    assert report.certificate == "exact"
    assert report.M1 and report.M2 and report.M3 and report.M4
    assert report.confirms_declared


def test_identity_is_completely_but_not_strictly_monotone():
    report = classify_monotonicity(MapInstance.linear_nonnegative(np.eye(2)), 100, 0)
    assert report.monotone and report.M1 and report.M2
    assert not report.M3
    assert report.witness is not None and report.witness["property"] == "M3"


def test_primitive_pattern_is_not_strict_in_one_step():
    report = classify_monotonicity(MapInstance.linear_nonnegative([[0, 1], [1, 1]]), 100, 0)
    assert report.M1
    assert not report.M3
    assert np.allclose(report.witness["image"], [0.0, 1.0])


def test_power_mean_sampled_classification():
    report = classify_monotonicity(_power_mean(3), 200, 1)
    assert report.certificate == "sampled"
    assert report.homogeneous and report.monotone
    assert report.M1 and report.M2 and report.M3 and report.M4
    assert report.concave_consistent
    assert report.confirms_declared


def test_leontief_annihilates_boundary_rays():
    report = classify_monotonicity(_leontief(4), 200, 1)
    assert report.monotone
    assert not report.M1
    assert not report.M3
    assert report.M2 and report.M4
    assert report.confirms_declared


@pytest.mark.parametrize("map_", [_positive(0), _power_mean(1), _leontief(2), _conjugated(3),
                                  MapInstance.linear_nonnegative([[0, 1], [1, 1]])])
def test_reports_never_claim_strictness_without_m1(map_):
    report = classify_monotonicity(map_, 100, 11)
    assert not (report.M3 and not report.M1)


# ============================================================================
# Superadditivity and non-expansiveness
# ============================================================================

@pytest.mark.parametrize("map_", [_positive(0), _power_mean(1), _leontief(2), _conjugated(3)])
def test_concave_families_are_superadditive(map_):
    report = check_superadditivity(map_, 1000, 3)
    assert report.passed
    assert report.pairs == 1000


def test_convex_map_is_not_superadditive():
    cone = ConeSpec.orthant(2)
    # the l2 norm in each coordinate is convex, hence subadditive
    map_ = MapInstance.custom(lambda x: np.full(2, np.linalg.norm(x)), cone, cone)
    report = check_superadditivity(map_, 500, 0)
    assert not report.passed
    assert report.witness is not None


@pytest.mark.parametrize("map_", [_positive(0), _power_mean(1), _leontief(2), _conjugated(3),
                                  MapInstance.linear_nonnegative(np.eye(3))])
def test_normalized_maps_are_nonexpansive(map_):
    report = check_nonexpansive(map_, 2000, 5)
    assert report.violations == 0
    assert report.max_excess <= 1e-10
    assert report.passed


@pytest.mark.parametrize("map_", [_positive(10), _power_mean(11), _conjugated(12)])
def test_strictly_monotone_maps_contract_strictly(map_):
    report = check_nonexpansive(map_, 2000, 6)
    assert report.strict_checked > 0
    assert report.strict_violations == 0


def test_expanding_map_is_caught():
    cone = ConeSpec.orthant(2)
    map_ = MapInstance.custom(lambda x: x ** 2, cone, cone)
    report = check_nonexpansive(map_, 200, 0)
    assert report.violations > 0
    assert not report.passed
