import math

import numpy as np
import pytest

from stochastic_pf.cones import ConeKind, contains, default_functional, sample_section
from stochastic_pf.envpath import (
    INDEX_BUDGET,
    EnvironmentPath,
    Scenario,
    cocycle_apply,
    cocycle_matrix,
    cone_at,
    functional_at,
    pullback_strictness_depth,
    scenario_from_config,
    shift,
    step_at,
    strictness_index,
)
from stochastic_pf.errors import ConfigError, IndexBudgetExceeded, NotInCone
from stochastic_pf.maps import MapFamily, apply


def _fixed(matrix, seed=0):
    return EnvironmentPath(seed, Scenario("linear_nonnegative", len(matrix), matrix=tuple(map(tuple, matrix))))


# ============================================================================
# Random access
# ============================================================================

def test_steps_are_deterministic(positive_env):
    other = EnvironmentPath(positive_env.master_seed, positive_env.scenario)
    for k in np.random.default_rng(0).integers(-10**6, 10**6, size=100):
        a = step_at(positive_env, int(k)).map.linear_matrix
        b = step_at(other, int(k)).map.linear_matrix
        assert np.array_equal(a, b)


def test_query_order_does_not_matter():
    scenario = Scenario("power_mean", 3)
    env = EnvironmentPath(42, scenario)
    forward = [step_at(env, k).map.matrix.copy() for k in range(-5, 5)]
    backward = [step_at(EnvironmentPath(42, scenario), k).map.matrix for k in reversed(range(-5, 5))]
    for a, b in zip(forward, reversed(backward)):
        assert np.array_equal(a, b)


def test_seeds_give_different_paths():
    scenario = Scenario("linear_positive", 3)
    a = step_at(EnvironmentPath(1, scenario), 0).map.linear_matrix
    b = step_at(EnvironmentPath(2, scenario), 0).map.linear_matrix
    assert not np.array_equal(a, b)


def test_shift_is_index_translation(positive_env):
    for s in (-7, 0, 3):
        shifted = shift(positive_env, s)
        for k in (-4, 0, 9):
            assert np.array_equal(step_at(shifted, k).map.linear_matrix,
                                  step_at(positive_env, k + s).map.linear_matrix)
            assert step_at(shifted, k).index == k + s


def test_entries_respect_bounds(positive_env):
    for k in range(-50, 50):
        A = step_at(positive_env, k).map.linear_matrix
        assert A.min() >= 0.5 and A.max() <= 2.0


def test_index_budget():
    env = EnvironmentPath(0, Scenario("linear_positive", 2))
    step_at(env, -INDEX_BUDGET)
    with pytest.raises(IndexBudgetExceeded):
        step_at(env, INDEX_BUDGET + 1)
    with pytest.raises(IndexBudgetExceeded):
        step_at(env.shift(INDEX_BUDGET), 1)


def test_step_functional_is_default_functional():
    env = EnvironmentPath(5, Scenario("linear_positive", 3, cone_mode="simplicial_random"))
    for k in range(-3, 3):
        triple = step_at(env, k)
        assert triple.cone.kind is ConeKind.SIMPLICIAL
        assert np.array_equal(triple.phi.coefficients, default_functional(triple.cone).coefficients)
        assert triple.map.cone_out is cone_at(env, k + 1)
        assert functional_at(env, k) is triple.phi


def test_random_cones_are_compatible():
    env = EnvironmentPath(9, Scenario("linear_positive", 3, cone_mode="simplicial_random", epsilon=0.3))
    for k in range(-5, 5):
        triple = step_at(env, k)
        assert triple.map.family is MapFamily.SIMPLICIAL_CONJUGATED
        for g in triple.cone.generators.T:
            assert contains(cone_at(env, k + 1), apply(triple.map, g))


def test_fixed_scenario_repeats_one_matrix():
    env = EnvironmentPath(3, Scenario("linear_positive", 3, fixed=True))
    first = step_at(env, 0).map.linear_matrix
    for k in (-100, -1, 1, 57):
        assert np.array_equal(step_at(env, k).map.linear_matrix, first)


def test_scaled_scenario_draws_log_uniform_factors():
    env = EnvironmentPath(3, Scenario("linear_positive", 2, fixed=True, scale_range=(0.5, 2.0)))
    base = np.array(step_at(EnvironmentPath(3, Scenario("linear_positive", 2, fixed=True)), 0).map.linear_matrix)
    factors = [step_at(env, k).map.linear_matrix[0, 0] / base[0, 0] for k in range(200)]
    assert 0.5 <= min(factors) and max(factors) <= 2.0
    assert len(set(np.round(factors, 12))) > 100


def test_fixed_map_scenario_repeats_its_map():
    scenario, _ = scenario_from_config({
        "cone": {"type": "simplicial", "G": [[2, 1], [1, 2]]},
        "map": {"family": "simplicial_conjugated", "P": [[2, 1], [1, 3]]},
    })
    env = EnvironmentPath(5, scenario)
    first = step_at(env, 0)
    assert first.cone.kind is ConeKind.SIMPLICIAL
    assert first.map.family is MapFamily.SIMPLICIAL_CONJUGATED
    for k in (-40, -1, 3):
        assert step_at(env, k).map is first.map
        assert cone_at(env, k) is first.cone
    assert step_at(EnvironmentPath(6, scenario), 0).map is first.map


def test_permutation_scenario():
    env = EnvironmentPath(1, Scenario("permutation", 4))
    for k in range(10):
        P = step_at(env, k).map.linear_matrix
        assert np.array_equal(np.sort(P.sum(axis=0)), np.ones(4))
        assert np.array_equal(np.sort(P.sum(axis=1)), np.ones(4))


# ============================================================================
# Cocycle
# ============================================================================

def test_cocycle_zero_steps_is_identity(positive_env):
    x = np.array([0.1, 0.2, 0.3, 0.4])
    image = cocycle_apply(positive_env, 5, 0, x)
    assert np.array_equal(image.value(), x)


def test_cocycle_one_step_is_apply(positive_env):
    x = np.array([0.1, 0.2, 0.3, 0.4])
    image = cocycle_apply(positive_env, -2, 1, x)
    expected = apply(step_at(positive_env, -2).map, x)
    assert np.allclose(image.value(), expected, rtol=1e-14, atol=0)


def test_cocycle_rejects_points_outside():
    env = EnvironmentPath(0, Scenario("linear_positive", 2))
    with pytest.raises(NotInCone):
        cocycle_apply(env, 0, 3, [1.0, -1.0])


@pytest.mark.parametrize("scenario", [
    Scenario("linear_positive", 3),
    Scenario("linear_positive", 3, cone_mode="simplicial_random"),
    Scenario("power_mean", 3),
    Scenario("leontief_min", 3),
])
def test_cocycle_identity(scenario):
    rng = np.random.default_rng(17)
    for trial in range(25):
        env = EnvironmentPath(trial, scenario)
        base = int(rng.integers(-50, 50))
        s, t = (int(v) for v in rng.integers(0, 11, size=2))
        cone = cone_at(env, base)
        x = sample_section(cone, default_functional(cone), rng, 1)[0]
        inner = cocycle_apply(env, base, s, x)
        outer = cocycle_apply(env, base + s, t, inner.vector)
        whole = cocycle_apply(env, base, s + t, x)
        combined = outer.vector * math.exp(outer.log_scale + inner.log_scale - whole.log_scale)
        assert np.abs(combined - whole.vector).max() <= 1e-10 * np.abs(whole.vector).max()


def test_cocycle_commutes_with_shift(positive_env):
    x = np.array([1.0, 2.0, 3.0, 4.0])
    a = cocycle_apply(shift(positive_env, 6), -3, 7, x)
    b = cocycle_apply(positive_env, 3, 7, x)
    assert np.array_equal(a.vector, b.vector)
    assert a.log_scale == b.log_scale


def test_cocycle_survives_long_products(positive_env):
    image = cocycle_apply(positive_env, 0, 5000, np.ones(4))
    assert np.all(np.isfinite(image.vector))
    assert image.log_scale > 100.0


def test_cocycle_matrix_matches_cocycle_apply(positive_env):
    Q, log_scale = cocycle_matrix(positive_env, -4, 6)
    x = np.array([0.4, 0.1, 0.2, 0.3])
    image = cocycle_apply(positive_env, -4, 6, x)
    assert np.allclose((Q @ x) * math.exp(log_scale - image.log_scale), image.vector, rtol=1e-12)
    with pytest.raises(ValueError):
        cocycle_matrix(EnvironmentPath(0, Scenario("power_mean", 2)), 0, 2)


# ============================================================================
# Strictness
# ============================================================================

def test_strictness_of_positive_matrices(positive_env):
    result = strictness_index(positive_env, 0, 64)
    assert result.length == 1
    assert result.certificate == "exact"


def test_strictness_of_primitive_pattern():
    assert strictness_index(_fixed([[0.0, 1.0], [1.0, 1.0]]), 0, 64).length == 2


def test_permutations_never_become_strict():
    env = EnvironmentPath(0, Scenario("permutation", 3))
    result = strictness_index(env, 0, 64)
    assert result.length is None
    assert not result.found


def test_identity_never_becomes_strict():
    assert pullback_strictness_depth(_fixed([[1.0, 0.0], [0.0, 1.0]]), 20).length is None


def test_strictness_persists_under_completely_monotone_steps():
    scenario = Scenario("linear_nonnegative", 4, zero_probability=0.5)
    checked = 0
    for seed in range(50):
        env = EnvironmentPath(seed, scenario)
        result = strictness_index(env, 0, 30)
        if not result.found:
            continue
        following = step_at(env, result.length).map.linear_matrix
        if np.all(following.sum(axis=1) > 0.0):
            Q, _ = cocycle_matrix(env, 0, result.length + 1)
            assert np.all(Q > 0.0)
            checked += 1
    assert checked > 0


def test_power_mean_strictness_is_sampled():
    env = EnvironmentPath(0, Scenario("power_mean", 3))
    result = strictness_index(env, 0, 5)
    assert result.length == 1
    assert result.certificate == "sampled"


def test_pullback_strictness_depth():
    assert pullback_strictness_depth(_fixed([[0.0, 1.0], [1.0, 1.0]]), 10).length == 2
    env = EnvironmentPath(2, Scenario("linear_positive", 3))
    assert pullback_strictness_depth(env, 10).length == 1


# ============================================================================
# Config
# ============================================================================

def test_scenario_from_config():
    scenario, seed = scenario_from_config({"family": "power_mean", "n": 3, "p": 0.5, "seed": 9})
    assert scenario == Scenario("power_mean", 3, p=0.5)
    assert seed == 9
    scenario, _ = scenario_from_config({"family": "linear_positive", "matrix": [[1, 2], [3, 4]]})
    assert scenario.n == 2
    assert scenario.matrix == ((1.0, 2.0), (3.0, 4.0))


@pytest.mark.parametrize("spec, field", [
    ({"family": "lorentz", "n": 2}, "scenario.family"),
    ({"family": "linear_positive", "n": 0}, "scenario.n"),
    ({"family": "linear_positive", "n": 2, "lo": 3.0, "hi": 1.0}, "scenario.lo"),
    ({"family": "power_mean", "n": 2, "p": 2.0}, "scenario.p"),
    ({"family": "power_mean", "n": 2, "cone_mode": "simplicial_random"}, "scenario.cone_mode"),
    ({"family": "linear_positive", "n": 2, "scale_range": [2.0, 1.0]}, "scenario.scale_range"),
    ({"family": "linear_positive", "matrix": [[1, 2, 3]]}, "scenario.matrix"),
    ({"family": "linear_positive", "n": 2, "lo": "low"}, "scenario.lo"),
    ({"family": "linear_positive", "n": 2.0}, "scenario.n"),
    ({"map": {"family": "leontief_min", "A": [[1, 2], [3, 4]]}, "cone_mode": "simplicial_random"}, "scenario.cone_mode"),
    ({"map": {"family": "simplicial_conjugated", "P": [[1, 2], [3, 4]]}}, "scenario.map"),
    ({"map": {"family": "linear_positive", "A": [[1, 2], [3, 4]]}, "cone": {"type": "orthant", "n": 3}},
     "scenario.cone"),
])
def test_scenario_config_errors_name_the_field(spec, field):
    with pytest.raises(ConfigError) as info:
        scenario_from_config(spec)
    assert info.value.field == field
