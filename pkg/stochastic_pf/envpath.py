"""
Environment paths - a seeded two-sided sequence of (cone, functional, step map).

The master seed plays the role of ω and index translation plays the role of
the shift T. The triple at index k is a pure function of (seed, scenario, k):
every index gets its own counter-based Philox stream, so negative indices
deep in the past cost the same as index 0.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from stochastic_pf.cones import (
    ConeKind,
    ConeSpec,
    Functional,
    as_vector,
    cone_from_config,
    contains,
    default_functional,
    interior_contains,
    sample_face,
)
from stochastic_pf.errors import ConfigError, IndexBudgetExceeded, NotInCone
from stochastic_pf.maps import MapInstance, apply, map_from_config

logger = logging.getLogger(__name__)

INDEX_BUDGET = 2 ** 48
SEED_MODULUS = 2 ** 64

STREAM_MAP = 0
STREAM_CONE = 1
STREAM_SCALE = 2
STREAM_PROBE = 3

MAP_FAMILIES = ("linear_positive", "linear_nonnegative", "power_mean", "leontief_min", "permutation")
CONE_MODES = ("constant", "simplicial_random")


@dataclass(frozen=True)
class Scenario:
    """Per-index sampling law of the environment (hashable, immutable)."""

    family: str
    n: int
    lo: float = 0.5
    hi: float = 2.0
    cone_mode: str = "constant"
    epsilon: float = 0.2
    p: float = 0.5
    zero_probability: float = 0.0
    matrix: Optional[Tuple[Tuple[float, ...], ...]] = None
    fixed: bool = False
    scale_range: Optional[Tuple[float, float]] = None
    cone_spec: Optional[str] = None
    map_spec: Optional[str] = None

    @property
    def is_linear(self) -> bool:
        if self.map_spec is not None:
            return _fixed_map(self.cone_spec, self.map_spec).linear_matrix is not None
        return self.family in ("linear_positive", "linear_nonnegative", "permutation")

    def describe(self) -> dict:
        if self.map_spec is not None:
            out = {"family": self.family, "n": self.n, "map": json.loads(self.map_spec)}
            if self.cone_spec is not None:
                out["cone"] = json.loads(self.cone_spec)
            return out
        out = {
            "family": self.family, "n": self.n, "lo": self.lo, "hi": self.hi,
            "cone_mode": self.cone_mode, "epsilon": self.epsilon, "fixed": self.fixed,
        }
        if self.family == "power_mean":
            out["p"] = self.p
        if self.zero_probability:
            out["zero_probability"] = self.zero_probability
        if self.matrix is not None:
            out["matrix"] = [list(row) for row in self.matrix]
        if self.scale_range is not None:
            out["scale_range"] = list(self.scale_range)
        return out


def _number(spec: dict, where: str, key: str, default: float) -> float:
    value = spec.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where}.{key}", f"must be a finite number, got {value!r}")
    return float(value)


def _canonical(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def _fixed_block(spec: dict, where: str) -> Tuple[Optional[str], str, int]:
    """Validate the optional `cone` and `map` tables; returns (cone_spec, map_spec, n)."""
    cone_raw = spec.get("cone")
    map_raw = spec["map"]
    for key in ("matrix", "fixed", "scale_range"):
        if key in spec:
            raise ConfigError(f"{where}.{key}", "cannot be combined with a fixed map")
    if spec.get("cone_mode", "constant") != "constant":
        raise ConfigError(f"{where}.cone_mode", "a fixed map lives on one constant cone")
    cone = None if cone_raw is None else cone_from_config(cone_raw, where=f"{where}.cone")
    map_ = map_from_config(map_raw, cone, cone, where=f"{where}.map")
    if map_.cone_in.dimension != map_.cone_out.dimension:
        raise ConfigError(f"{where}.map", "a fixed map must send its cone into itself")
    if cone is not None and map_.cone_in is not cone:
        if cone.kind is not ConeKind.ORTHANT or cone.dimension != map_.cone_in.dimension:
            raise ConfigError(f"{where}.cone", f"{map_.family.value} maps act on the orthant of their "
                                               f"dimension; use simplicial_conjugated for other cones")
    try:
        cone_spec = None if cone_raw is None else _canonical(cone_raw)
        map_spec = _canonical(map_raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}.map", f"not serialisable: {e}")
    return cone_spec, map_spec, map_.cone_in.dimension


def scenario_from_config(spec: dict, where: str = "scenario") -> Tuple[Scenario, int]:
    """Parse a scenario block; returns (scenario, master seed).

    Either a sampling law (`family`, `n`, entry bounds, ...) or a fixed map
    given as `map = {family, A|C|P, p}`, optionally on `cone = {type, ...}`.
    """
    if not isinstance(spec, dict):
        raise ConfigError(where, "expected a table/object")
    seed = spec.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"{where}.seed", "must be an integer")
    if "map" in spec:
        cone_spec, map_spec, n = _fixed_block(spec, where)
        family = str(spec["map"].get("family"))
        return Scenario(family=family, n=n, cone_spec=cone_spec, map_spec=map_spec), seed
    if "cone" in spec:
        raise ConfigError(f"{where}.cone", "an explicit cone needs a fixed map")

    family = spec.get("family")
    if family not in MAP_FAMILIES:
        raise ConfigError(f"{where}.family", f"must be one of {', '.join(MAP_FAMILIES)}")
    matrix = spec.get("matrix")
    if matrix is not None:
        try:
            M = np.array(matrix, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}.matrix", "must be a numeric matrix")
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConfigError(f"{where}.matrix", f"must be square, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ConfigError(f"{where}.matrix", "has non-finite entries")
        matrix = tuple(tuple(float(v) for v in row) for row in M)
    n = spec.get("n", len(matrix) if matrix is not None else None)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"{where}.n", "must be a positive integer")
    if matrix is not None and len(matrix) != n:
        raise ConfigError(f"{where}.matrix", f"must be {n}x{n}")
    lo, hi = _number(spec, where, "lo", 0.5), _number(spec, where, "hi", 2.0)
    if not (0.0 <= lo <= hi) or (family != "linear_nonnegative" and lo <= 0.0 and matrix is None):
        raise ConfigError(f"{where}.lo", f"entry bounds [{lo}, {hi}] must satisfy 0 < lo <= hi")
    cone_mode = spec.get("cone_mode", "constant")
    if cone_mode not in CONE_MODES:
        raise ConfigError(f"{where}.cone_mode", f"must be one of {', '.join(CONE_MODES)}")
    if cone_mode == "simplicial_random" and family in ("power_mean", "leontief_min"):
        raise ConfigError(f"{where}.cone_mode", "random cones are available for linear families only")
    epsilon = _number(spec, where, "epsilon", 0.2)
    if epsilon < 0.0:
        raise ConfigError(f"{where}.epsilon", "must be >= 0")
    p = _number(spec, where, "p", 0.5)
    if not (0.0 < p <= 1.0):
        raise ConfigError(f"{where}.p", "must lie in (0, 1]")
    zero_probability = _number(spec, where, "zero_probability", 0.0)
    if not (0.0 <= zero_probability < 1.0):
        raise ConfigError(f"{where}.zero_probability", "must lie in [0, 1)")
    scale_range = spec.get("scale_range")
    if scale_range is not None:
        if (not isinstance(scale_range, (list, tuple)) or len(scale_range) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in scale_range)
                or not (0.0 < float(scale_range[0]) <= float(scale_range[1]) < math.inf)):
            raise ConfigError(f"{where}.scale_range", "must be [lo, hi] with 0 < lo <= hi")
        scale_range = (float(scale_range[0]), float(scale_range[1]))
    fixed = spec.get("fixed", False)
    if not isinstance(fixed, bool):
        raise ConfigError(f"{where}.fixed", "must be true or false")
    scenario = Scenario(
        family=family, n=n, lo=lo, hi=hi, cone_mode=cone_mode, epsilon=epsilon, p=p,
        zero_probability=zero_probability, matrix=matrix, fixed=fixed, scale_range=scale_range,
    )
    return scenario, seed


@dataclass(frozen=True)
class EnvironmentPath:
    """ω as (master_seed, scenario); `offset` realises T^offset."""

    master_seed: int
    scenario: Scenario
    offset: int = 0

    @property
    def dimension(self) -> int:
        return self.scenario.n

    def shift(self, s: int) -> "EnvironmentPath":
        return replace(self, offset=self.offset + int(s))


def shift(env: EnvironmentPath, s: int) -> EnvironmentPath:
    return env.shift(s)


@dataclass(frozen=True, eq=False)
class StepTriple:
    """(K_k, φ_k, D_k: K_k -> K_{k+1}) at absolute path index `index`."""

    index: int
    cone: ConeSpec
    phi: Functional
    map: MapInstance = field(repr=False)


# ============================================================================
# Counter-based generation
# ============================================================================

def _generator(master_seed: int, index: int, stream: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed % SEED_MODULUS, spawn_key=(stream, index + INDEX_BUDGET))
    return np.random.Generator(np.random.Philox(seq))


def _absolute(env: EnvironmentPath, k: int) -> int:
    idx = int(k) + env.offset
    if abs(idx) > INDEX_BUDGET:
        raise IndexBudgetExceeded(f"index {idx} is outside the generator budget ±2^48")
    return idx


@lru_cache(maxsize=64)
def _orthant(n: int) -> ConeSpec:
    return ConeSpec.orthant(n)


@lru_cache(maxsize=64)
def _fixed_map(cone_spec: Optional[str], map_spec: str) -> MapInstance:
    cone = None if cone_spec is None else cone_from_config(json.loads(cone_spec))
    return map_from_config(json.loads(map_spec), cone, cone)


@lru_cache(maxsize=8192)
def _cone(master_seed: int, scenario: Scenario, idx: int) -> ConeSpec:
    if scenario.map_spec is not None:
        return _fixed_map(scenario.cone_spec, scenario.map_spec).cone_in
    if scenario.cone_mode == "constant":
        return _orthant(scenario.n)
    rng = _generator(master_seed, idx, STREAM_CONE)
    G = np.eye(scenario.n) + scenario.epsilon * rng.uniform(0.0, 1.0, size=(scenario.n, scenario.n))
    return ConeSpec.simplicial(G)


def _draw_matrix(master_seed: int, scenario: Scenario, idx: int) -> np.ndarray:
    if scenario.matrix is not None:
        return np.array(scenario.matrix, dtype=float)
    if scenario.fixed:
        return _fixed_matrix(master_seed, scenario)
    return _sample_matrix(_generator(master_seed, idx, STREAM_MAP), scenario)


@lru_cache(maxsize=256)
def _fixed_matrix(master_seed: int, scenario: Scenario) -> np.ndarray:
    A = _sample_matrix(_generator(master_seed, 0, STREAM_MAP), scenario)
    A.setflags(write=False)
    return A


def _sample_matrix(rng: np.random.Generator, scenario: Scenario) -> np.ndarray:
    n = scenario.n
    if scenario.family == "permutation":
        P = np.zeros((n, n))
        P[np.arange(n), rng.permutation(n)] = 1.0
        return P
    A = rng.uniform(scenario.lo, scenario.hi, size=(n, n))
    if scenario.family == "linear_nonnegative" and scenario.zero_probability > 0.0:
        A *= rng.uniform(size=(n, n)) >= scenario.zero_probability
    return A


def _scale(master_seed: int, scenario: Scenario, idx: int) -> float:
    if scenario.scale_range is None:
        return 1.0
    lo, hi = scenario.scale_range
    rng = _generator(master_seed, idx, STREAM_SCALE)
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


@lru_cache(maxsize=8192)
def _step(master_seed: int, scenario: Scenario, idx: int) -> StepTriple:
    cone = _cone(master_seed, scenario, idx)
    if scenario.map_spec is not None:
        return StepTriple(idx, cone, _functional(cone), _fixed_map(scenario.cone_spec, scenario.map_spec))
    A = _draw_matrix(master_seed, scenario, idx)
    c = _scale(master_seed, scenario, idx)
    family = scenario.family
    if scenario.cone_mode == "simplicial_random":
        step_map = MapInstance.simplicial_conjugated(c * A, cone, _cone(master_seed, scenario, idx + 1))
    elif family == "power_mean":
        step_map = MapInstance.power_mean(A * c ** scenario.p, scenario.p)
    elif family == "leontief_min":
        step_map = MapInstance.leontief_min(A / c)
    elif np.all(A > 0.0):
        step_map = MapInstance.linear_positive(c * A)
    else:
        step_map = MapInstance.linear_nonnegative(c * A)
    return StepTriple(idx, cone, _functional(cone), step_map)


@lru_cache(maxsize=8192)
def _functional(cone: ConeSpec) -> Functional:
    return default_functional(cone)


def step_at(env: EnvironmentPath, k: int) -> StepTriple:
    """The step triple at path index k (relative to the environment's shift)."""
    return _step(env.master_seed, env.scenario, _absolute(env, k))


def cone_at(env: EnvironmentPath, k: int) -> ConeSpec:
    return _cone(env.master_seed, env.scenario, _absolute(env, k))


def functional_at(env: EnvironmentPath, k: int) -> Functional:
    return step_at(env, k).phi


# ============================================================================
# Cocycle C(t, ω) = D_t ∘ ... ∘ D_1
# ============================================================================

@dataclass(frozen=True)
class CocycleImage:
    """C(t)x represented as vector · exp(log_scale), with ||vector||_inf = 1 for t >= 1."""

    vector: np.ndarray
    log_scale: float

    def value(self) -> np.ndarray:
        return self.vector * math.exp(self.log_scale)


def cocycle_apply(env: EnvironmentPath, base: int, t: int, x) -> CocycleImage:
    """Apply the steps at base, ..., base + t - 1 to x ∈ K_base; t = 0 is the identity."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    v = as_vector(cone_at(env, base), x)
    if not contains(cone_at(env, base), v):
        raise NotInCone(f"x is outside K_{base}", v)
    if t == 0:
        return CocycleImage(v.copy(), 0.0)
    log_scale = 0.0
    for k in range(base, base + t):
        v = apply(step_at(env, k).map, v)
        s = float(np.abs(v).max())
        if s == 0.0:
            return CocycleImage(v, -math.inf)
        v = v / s
        log_scale += math.log(s)
    return CocycleImage(v, log_scale)


def cocycle_matrix(env: EnvironmentPath, base: int, t: int) -> Tuple[np.ndarray, float]:
    """(Q, log_scale) with A_{base+t-1} ··· A_base = Q · exp(log_scale); linear families only."""
    if not env.scenario.is_linear:
        raise ValueError(f"{env.scenario.family} steps have no matrix")
    Q = np.eye(env.dimension)
    log_scale = 0.0
    for k in range(base, base + t):
        Q = step_at(env, k).map.linear_matrix @ Q
        s = float(np.abs(Q).max())
        if s == 0.0:
            return Q, -math.inf
        Q /= s
        log_scale += math.log(s)
    return Q, log_scale


# ============================================================================
# Condition (C): strictness index
# ============================================================================

@dataclass(frozen=True)
class StrictnessResult:
    length: Optional[int]
    certificate: str

    @property
    def found(self) -> bool:
        return self.length is not None


def strictly_positive_on_rays(cone_out: ConeSpec, Q: np.ndarray, cone_in: ConeSpec) -> bool:
    """Exact test that the linear map Q sends K_in minus {0} into the interior of K_out."""
    V = cone_out.facets @ Q @ cone_in.rays.T
    top = float(np.abs(V).max())
    return top > 0.0 and bool(np.all(V > 1e-12 * top))


def _boundary_probes(env: EnvironmentPath, k: int, count: int = 16) -> np.ndarray:
    cone = cone_at(env, k)
    rng = _generator(env.master_seed, _absolute(env, k), STREAM_PROBE)
    return np.vstack([cone.rays, sample_face(cone, default_functional(cone), rng, count)])


def strictness_index(env: EnvironmentPath, base: int, max_l: int) -> StrictnessResult:
    """Smallest l <= max_l with C(l, T^base ω) strictly monotone, or None.

    Linear families use the exact certificate F_{base+l} · A_{base+l-1} ··· A_base ·
    rays(K_base) > 0. Nonlinear families push boundary probes forward and
    require every image to be interior (sampled certificate).
    """
    if max_l < 1:
        raise ValueError(f"max_l must be >= 1, got {max_l}")
    if env.scenario.is_linear:
        Q = np.eye(env.dimension)
        for l in range(1, max_l + 1):
            Q = step_at(env, base + l - 1).map.linear_matrix @ Q
            Q /= float(np.abs(Q).max()) or 1.0
            if strictly_positive_on_rays(cone_at(env, base + l), Q, cone_at(env, base)):
                return StrictnessResult(l, "exact")
        return StrictnessResult(None, "exact")

    images = _boundary_probes(env, base)
    for l in range(1, max_l + 1):
        step = step_at(env, base + l - 1)
        images = np.array([apply(step.map, h) for h in images])
        images /= np.abs(images).max(axis=1, keepdims=True).clip(min=1e-300)
        target = cone_at(env, base + l)
        if all(interior_contains(target, h) for h in images):
            return StrictnessResult(l, "sampled")
    return StrictnessResult(None, "sampled")


def pullback_strictness_depth(env: EnvironmentPath, max_depth: int) -> StrictnessResult:
    """Smallest m >= 1 with C(m, T^-m ω): K_-m -> K_0 strictly monotone, or None."""
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    if env.scenario.is_linear:
        Q = np.eye(env.dimension)
        for m in range(1, max_depth + 1):
            Q = Q @ step_at(env, -m).map.linear_matrix
            Q /= float(np.abs(Q).max()) or 1.0
            if strictly_positive_on_rays(cone_at(env, 0), Q, cone_at(env, -m)):
                return StrictnessResult(m, "exact")
        return StrictnessResult(None, "exact")

    for m in range(1, max_depth + 1):
        target = cone_at(env, 0)
        if all(interior_contains(target, cocycle_apply(env, -m, m, h).vector)
               for h in _boundary_probes(env, -m)):
            return StrictnessResult(m, "sampled")
    return StrictnessResult(None, "sampled")
