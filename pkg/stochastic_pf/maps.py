"""
Maps - monotone, positively homogeneous maps D: K_in -> K_out.

The families are linear (positive or nonnegative matrices), power means,
Leontief minima, and linear maps conjugated between simplicial cones. Each
map carries its declared monotonicity class. The classifiers here are
falsification tools: a report can refute a property with a witness, and it
certifies one exactly only for linear families.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from stochastic_pf.cones import (
    ConeKind,
    ConeSpec,
    Functional,
    as_vector,
    contains,
    default_functional,
    interior_contains,
    sample_face,
    sample_section,
    section_centroid,
)
from stochastic_pf.errors import ConfigError, DegenerateCone, DimensionMismatch, MapAnnihilates, NotInCone
from stochastic_pf.hilbert import MetricContext, distance

logger = logging.getLogger(__name__)

HOMOGENEITY_TOL = 1e-10
ORDER_TOL = 1e-10
NONEXPANSIVE_SLACK = 1e-10
STRICT_MIN_DISTANCE = 1e-6
STRICT_AMBIGUITY = 1e-12


class MapFamily(str, Enum):
    LINEAR_POSITIVE = "linear_positive"
    LINEAR_NONNEGATIVE = "linear_nonnegative"
    POWER_MEAN = "power_mean"
    LEONTIEF_MIN = "leontief_min"
    SIMPLICIAL_CONJUGATED = "simplicial_conjugated"
    CUSTOM = "custom"


LINEAR_FAMILIES = {MapFamily.LINEAR_POSITIVE, MapFamily.LINEAR_NONNEGATIVE, MapFamily.SIMPLICIAL_CONJUGATED}


class MonotoneClass(str, Enum):
    MONOTONE = "monotone"
    COMPLETELY_MONOTONE = "completely_monotone"
    STRICTLY_MONOTONE = "strictly_monotone"

    @property
    def rank(self) -> int:
        return {"monotone": 1, "completely_monotone": 2, "strictly_monotone": 3}[self.value]


@dataclass(frozen=True, eq=False)
class MapInstance:
    """One monotone homogeneous map between two solid cones."""

    family: MapFamily
    cone_in: ConeSpec
    cone_out: ConeSpec
    declared_class: MonotoneClass
    matrix: Optional[np.ndarray] = None
    exponent: float = 1.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    concave: bool = True

    # ---------------------------------------------------------------------
    # Constructors
    # ---------------------------------------------------------------------

    @classmethod
    def linear_positive(cls, A, declared_class=MonotoneClass.STRICTLY_MONOTONE) -> "MapInstance":
        A = _matrix(A, "A")
        if not np.all(A > 0.0):
            raise DegenerateCone("linear_positive needs every entry of A strictly positive")
        return cls(MapFamily.LINEAR_POSITIVE, ConeSpec.orthant(A.shape[1]), ConeSpec.orthant(A.shape[0]),
                   MonotoneClass(declared_class), A)

    @classmethod
    def linear_nonnegative(cls, A, declared_class=MonotoneClass.MONOTONE) -> "MapInstance":
        A = _matrix(A, "A")
        if not np.all(A >= 0.0):
            raise DegenerateCone("linear_nonnegative needs A >= 0")
        return cls(MapFamily.LINEAR_NONNEGATIVE, ConeSpec.orthant(A.shape[1]), ConeSpec.orthant(A.shape[0]),
                   MonotoneClass(declared_class), A)

    @classmethod
    def power_mean(cls, C, p: float, declared_class=None) -> "MapInstance":
        C = _matrix(C, "C")
        if not np.all(C >= 0.0):
            raise DegenerateCone("power_mean needs C >= 0")
        if not (0.0 < float(p) <= 1.0):
            raise DegenerateCone(f"power_mean exponent must lie in (0, 1], got {p}")
        if declared_class is None:
            declared_class = MonotoneClass.STRICTLY_MONOTONE if np.all(C > 0.0) else MonotoneClass.MONOTONE
        return cls(MapFamily.POWER_MEAN, ConeSpec.orthant(C.shape[1]), ConeSpec.orthant(C.shape[0]),
                   MonotoneClass(declared_class), C, float(p))

    @classmethod
    def leontief_min(cls, A, declared_class=MonotoneClass.MONOTONE) -> "MapInstance":
        A = _matrix(A, "A")
        if not np.all(A > 0.0):
            raise DegenerateCone("leontief_min needs every entry of A strictly positive")
        return cls(MapFamily.LEONTIEF_MIN, ConeSpec.orthant(A.shape[1]), ConeSpec.orthant(A.shape[0]),
                   MonotoneClass(declared_class), A)

    @classmethod
    def simplicial_conjugated(cls, P, cone_in: ConeSpec, cone_out: ConeSpec,
                              declared_class=None) -> "MapInstance":
        """D(x) = G_out · P · G_in^-1 · x between simplicial (or orthant) cones."""
        P = _matrix(P, "P")
        if cone_in.generators is None or cone_out.generators is None:
            raise DegenerateCone("simplicial_conjugated needs simplicial or orthant cones")
        if P.shape != (cone_out.dimension, cone_in.dimension):
            raise DimensionMismatch(f"P has shape {P.shape}, cones need {(cone_out.dimension, cone_in.dimension)}")
        if not np.all(P >= 0.0):
            raise DegenerateCone("simplicial_conjugated needs P >= 0")
        if declared_class is None:
            declared_class = MonotoneClass.STRICTLY_MONOTONE if np.all(P > 0.0) else MonotoneClass.MONOTONE
        return cls(MapFamily.SIMPLICIAL_CONJUGATED, cone_in, cone_out, MonotoneClass(declared_class), P)

    @classmethod
    def custom(cls, func, cone_in: ConeSpec, cone_out: ConeSpec,
               declared_class=MonotoneClass.MONOTONE, concave: bool = False) -> "MapInstance":
        """Wrap an arbitrary callable; evaluated without internal rescaling."""
        return cls(MapFamily.CUSTOM, cone_in, cone_out, MonotoneClass(declared_class), func=func, concave=concave)

    def __post_init__(self):
        if self.family in (MapFamily.LINEAR_POSITIVE, MapFamily.LINEAR_NONNEGATIVE,
                           MapFamily.POWER_MEAN, MapFamily.LEONTIEF_MIN):
            if self.cone_in.kind is not ConeKind.ORTHANT or self.cone_out.kind is not ConeKind.ORTHANT:
                raise DegenerateCone(f"{self.family.value} maps are defined between orthants only")

    # ---------------------------------------------------------------------
    # Derived
    # ---------------------------------------------------------------------

    @property
    def is_linear(self) -> bool:
        return self.family in LINEAR_FAMILIES

    @cached_property
    def linear_matrix(self) -> Optional[np.ndarray]:
        """Ambient matrix of a linear family, None for nonlinear maps."""
        if self.family is MapFamily.SIMPLICIAL_CONJUGATED:
            out = self.cone_out.generators @ self.matrix @ self.cone_in.facets
        elif self.is_linear:
            out = np.array(self.matrix)
        else:
            return None
        out.setflags(write=False)
        return out

    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        if self.family is MapFamily.CUSTOM:
            out = np.asarray(self.func(v), dtype=float)
            if out.shape != (self.cone_out.dimension,):
                raise DimensionMismatch(f"custom map returned shape {out.shape}")
            return out
        scale = float(np.abs(v).max())
        if scale == 0.0:
            return np.zeros(self.cone_out.dimension)
        z = v / scale
        if self.is_linear:
            y = self.linear_matrix @ z
        elif self.family is MapFamily.POWER_MEAN:
            p = self.exponent
            y = (self.matrix @ np.maximum(z, 0.0) ** p) ** (1.0 / p)
        else:
            y = (np.maximum(z, 0.0)[None, :] / self.matrix).min(axis=1)
        return scale * y

    def describe(self) -> dict:
        out = {"family": self.family.value, "declared_class": self.declared_class.value}
        if self.matrix is not None:
            out["matrix"] = self.matrix.tolist()
        if self.family is MapFamily.POWER_MEAN:
            out["p"] = self.exponent
        return out


def _matrix(value, name: str) -> np.ndarray:
    M = np.array(value, dtype=float)
    if M.ndim != 2 or 0 in M.shape:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DegenerateCone(f"{name} has non-finite entries")
    M.setflags(write=False)
    return M


def map_from_config(spec: dict, cone_in: Optional[ConeSpec] = None, cone_out: Optional[ConeSpec] = None,
                    where: str = "map") -> MapInstance:
    """Build a map from `{family: linear_positive, A: [[...]]}`, `{family: power_mean, C, p}` etc."""
    if not isinstance(spec, dict):
        raise ConfigError(where, "expected a table/object")
    family = spec.get("family")
    declared = spec.get("declared_class")
    try:
        if family == "linear_positive":
            return MapInstance.linear_positive(spec["A"], declared or MonotoneClass.STRICTLY_MONOTONE)
        if family == "linear_nonnegative":
            return MapInstance.linear_nonnegative(spec["A"], declared or MonotoneClass.MONOTONE)
        if family == "power_mean":
            return MapInstance.power_mean(spec["C"], float(spec.get("p", 0.5)), declared)
        if family == "leontief_min":
            return MapInstance.leontief_min(spec["A"], declared or MonotoneClass.MONOTONE)
        if family == "simplicial_conjugated":
            if cone_in is None or cone_out is None:
                raise ConfigError(where, "simplicial_conjugated needs cone_in and cone_out")
            return MapInstance.simplicial_conjugated(spec["P"], cone_in, cone_out, declared)
    except KeyError as e:
        raise ConfigError(f"{where}.{e.args[0]}", "missing required field")
    except (DegenerateCone, DimensionMismatch, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(where, str(e))
    raise ConfigError(f"{where}.family", f"unknown map family {family!r}")


# ============================================================================
# Evaluation
# ============================================================================

def apply(map_: MapInstance, x) -> np.ndarray:
    """D(x) for x in K_in; nonlinear families rescale by ||x||_inf internally."""
    v = as_vector(map_.cone_in, x)
    if not contains(map_.cone_in, v):
        raise NotInCone("input is outside the map's input cone", v)
    return map_._evaluate(v)


def normalized_apply(map_: MapInstance, phi_out: Functional, x) -> np.ndarray:
    """g(x) = D(x) / <φ_out, D(x)>, a point of the output section."""
    v = as_vector(map_.cone_in, x)
    if float(np.abs(v).max()) == 0.0:
        raise NotInCone("the zero vector has no image on the section", v)
    y = apply(map_, v)
    value = phi_out(y)
    if not value > 0.0:
        raise MapAnnihilates("D(x) = 0: map is not completely monotone at x", v)
    return y / value


# ============================================================================
# Sampling helpers
# ============================================================================

def _scaled(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return points * 10.0 ** rng.uniform(-2.0, 2.0, size=(points.shape[0], 1))


def _probe_points(cone: ConeSpec, rng: np.random.Generator, samples: int):
    """(boundary points, interior points) of cone, boundary led by the extreme rays."""
    phi = default_functional(cone)
    boundary = np.vstack([cone.rays, _scaled(sample_face(cone, phi, rng, samples), rng)])
    interior = _scaled(sample_section(cone, phi, rng, samples), rng)
    return boundary, interior


def _gain(map_: MapInstance) -> float:
    c = section_centroid(map_.cone_in, default_functional(map_.cone_in))
    image = float(np.abs(map_._evaluate(c)).max())
    return image / float(np.abs(c).max()) if image > 0.0 else 1.0


def _geq(cone: ConeSpec, upper: np.ndarray, lower: np.ndarray, scale: float) -> bool:
    """upper ≥_K lower up to ORDER_TOL relative to `scale`."""
    return bool(np.all(cone.facets @ (upper - lower) >= -ORDER_TOL * scale * cone.row_scale))


def _strictly_above(cone: ConeSpec, upper: np.ndarray, lower: np.ndarray, scale: float) -> bool:
    return bool(np.all(cone.facets @ (upper - lower) > ORDER_TOL * scale * cone.row_scale))


# ============================================================================
# Homogeneity
# ============================================================================

@dataclass(frozen=True)
class HomogeneityReport:
    passed: bool
    max_deviation: float
    witness: Optional[dict] = None


def check_homogeneity(map_: MapInstance, samples: int, seed: int) -> HomogeneityReport:
    """max ||D(λx) - λD(x)|| / ||λD(x)|| over random (λ, x); passes iff <= 1e-10."""
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    boundary, interior = _probe_points(map_.cone_in, rng, samples)
    points = np.vstack([interior, boundary])[: max(samples, 1) + map_.cone_in.rays.shape[0]]
    lambdas = 10.0 ** rng.uniform(-3.0, 3.0, size=points.shape[0])
    worst, witness = 0.0, None
    for x, lam in zip(points, lambdas):
        expected = lam * apply(map_, x)
        got = apply(map_, lam * x)
        denom = float(np.abs(expected).max())
        gap = float(np.abs(got - expected).max())
        if denom == 0.0:
            deviation = 0.0 if gap == 0.0 else math.inf
        else:
            deviation = gap / denom
        if deviation > worst:
            worst = deviation
            witness = {"x": x.tolist(), "lambda": float(lam), "deviation": deviation}
    passed = worst <= HOMOGENEITY_TOL
    if not passed:
        logger.warning(f"Homogeneity violated for {map_.family.value}: deviation {worst:.3g}")
    return HomogeneityReport(passed, worst, None if passed else witness)


# ============================================================================
# Monotonicity taxonomy (M1)-(M4)
# ============================================================================

@dataclass(frozen=True)
class MonotonicityReport:
    homogeneous: bool
    monotone: bool
    M1: bool
    M2: bool
    M3: bool
    M4: bool
    sample_count: int
    witness: Optional[dict] = None
    certificate: str = "sampled"
    concave_consistent: bool = True
    declared_class: MonotoneClass = MonotoneClass.MONOTONE

    @property
    def completely_monotone(self) -> bool:
        return self.monotone and self.M1 and self.M2

    @property
    def strictly_monotone(self) -> bool:
        return self.monotone and self.M3

    @property
    def confirms_declared(self) -> bool:
        if self.declared_class is MonotoneClass.STRICTLY_MONOTONE:
            return self.strictly_monotone
        if self.declared_class is MonotoneClass.COMPLETELY_MONOTONE:
            return self.completely_monotone
        return self.monotone


def _linear_certificate(map_: MapInstance) -> MonotonicityReport:
    """Exact tests on the extreme rays: M3 iff F_out · L · rays > 0 entrywise."""
    L = map_.linear_matrix
    R = map_.cone_in.rays
    V = map_.cone_out.facets @ L @ R.T
    scale = float(np.abs(V).max()) or 1.0
    images = (L @ R.T).T
    witness = None

    monotone = bool(np.all(V >= -ORDER_TOL * scale))
    if not monotone:
        bad = int(np.argmin(V.min(axis=0)))
        witness = {"property": "monotone", "h": R[bad].tolist(), "image": images[bad].tolist()}

    nonzero = np.abs(images).max(axis=1) > 1e-12 * max(float(np.abs(images).max()), 1e-300)
    M1 = bool(np.all(nonzero))
    M3 = M1 and bool(np.all(V > 1e-12 * scale))
    if witness is None and not M3:
        bad = int(np.argmin(V.min(axis=0))) if M1 else int(np.argmin(nonzero))
        witness = {"property": "M3" if M1 else "M1", "h": R[bad].tolist(), "image": images[bad].tolist()}

    M2 = interior_contains(map_.cone_out, L @ R.sum(axis=0))
    return MonotonicityReport(
        homogeneous=True, monotone=monotone, M1=M1, M2=M2, M3=M3, M4=M2,
        sample_count=R.shape[0], witness=witness, certificate="exact",
        concave_consistent=True, declared_class=map_.declared_class,
    )


def classify_monotonicity(map_: MapInstance, samples: int, seed: int) -> MonotonicityReport:
    """Falsification sampling of monotonicity and (M1)-(M4).

    Ordered pairs x ≤ y = x + h are drawn with h on the boundary (x ≺ y) and in
    the interior (x < y); x = 0 gives the direct conditions on D(h). A failed
    implication clears the corresponding flag and stores a witness. Linear
    families get exact certificates instead. A passing sampled report is not a proof.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if map_.is_linear:
        return _linear_certificate(map_)

    rng = np.random.default_rng(seed)
    homogeneous = check_homogeneity(map_, samples, seed).passed
    boundary_h, interior_h = _probe_points(map_.cone_in, rng, samples)
    _, bases = _probe_points(map_.cone_in, rng, samples)
    bases = np.vstack([np.zeros(map_.cone_in.dimension), bases, sample_face(
        map_.cone_in, default_functional(map_.cone_in), rng, samples)])
    gain = _gain(map_)
    cone_out = map_.cone_out

    flags = {"monotone": True, "M1": True, "M2": True, "M3": True}
    M4 = False
    witness = None
    count = 0

    def fail(name, x, y):
        nonlocal witness
        if flags[name]:
            flags[name] = False
            if witness is None:
                witness = {"property": name, "x": x.tolist(), "y": y.tolist()}

    for h_set, h_boundary in ((boundary_h, True), (interior_h, False)):
        for h in h_set:
            x = bases[rng.integers(bases.shape[0])] if count % 2 else np.zeros_like(h)
            y = x + h
            dx, dy = map_._evaluate(x), map_._evaluate(y)
            scale = max(float(np.abs(dy).max()), gain * float(np.abs(h).max()))
            count += 1
            if not _geq(cone_out, dy, dx, scale):
                fail("monotone", x, y)
            strict = _strictly_above(cone_out, dy, dx, scale)
            if h_boundary:
                if float(np.abs(dy - dx).max()) <= 1e-12 * gain * float(np.abs(h).max()):
                    fail("M1", x, y)
                if not strict:
                    fail("M3", x, y)
            elif not strict:
                fail("M2", x, y)
            if not x.any() and strict:
                M4 = True

    M1 = flags["M1"]
    M3 = flags["M3"] and M1
    concave_consistent = (M4 == flags["M2"]) if map_.concave else True
    if not concave_consistent:
        logger.warning(f"M2/M4 disagree for concave {map_.family.value} map; sampling missed a witness")
    return MonotonicityReport(
        homogeneous=homogeneous, monotone=flags["monotone"], M1=M1, M2=flags["M2"], M3=M3, M4=M4,
        sample_count=count, witness=witness, certificate="sampled",
        concave_consistent=concave_consistent, declared_class=map_.declared_class,
    )


# ============================================================================
# Superadditivity D(x + y) ≥ D(x) + D(y)
# ============================================================================

@dataclass(frozen=True)
class SuperadditivityReport:
    passed: bool
    pairs: int
    witness: Optional[dict] = None


def check_superadditivity(map_: MapInstance, samples: int, seed: int) -> SuperadditivityReport:
    rng = np.random.default_rng(seed)
    boundary, interior = _probe_points(map_.cone_in, rng, samples)
    pool = np.vstack([interior, boundary])
    pairs = 0
    for _ in range(samples):
        x = pool[rng.integers(pool.shape[0])]
        y = pool[rng.integers(pool.shape[0])]
        total = apply(map_, x + y)
        parts = apply(map_, x) + apply(map_, y)
        pairs += 1
        if not _geq(map_.cone_out, total, parts, float(np.abs(total).max())):
            logger.warning(f"Superadditivity violated for {map_.family.value}")
            return SuperadditivityReport(False, pairs, {"x": x.tolist(), "y": y.tolist()})
    return SuperadditivityReport(True, pairs)


# ============================================================================
# Non-expansiveness of g(x) = D(x)/<φ_out, D(x)> in the Hilbert metric
# ============================================================================

@dataclass(frozen=True)
class NonexpansiveReport:
    pairs: int
    max_excess: float
    violations: int
    strict_checked: int
    strict_violations: int
    inadmissible: int
    witness: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.strict_violations == 0


def check_nonexpansive(map_: MapInstance, samples: int, seed: int,
                       phi_in: Optional[Functional] = None,
                       phi_out: Optional[Functional] = None) -> NonexpansiveReport:
    """d_out(g x, g y) ≤ d_in(x, y) + 1e-10 on interior section pairs.

    For maps declared strictly monotone, pairs with d_in > 1e-6 must contract
    strictly. A pair within 1e-12 of equality is resampled, not judged.
    Pairs whose images leave the interior are counted as inadmissible.
    """
    ctx_in = MetricContext(map_.cone_in, phi_in or default_functional(map_.cone_in))
    ctx_out = MetricContext(map_.cone_out, phi_out or default_functional(map_.cone_out))
    strict = map_.declared_class is MonotoneClass.STRICTLY_MONOTONE
    rng = np.random.default_rng(seed)

    pairs = violations = strict_checked = strict_violations = inadmissible = 0
    max_excess = -math.inf
    witness = None
    attempts = 0
    while pairs < samples and attempts < 3 * samples:
        attempts += 1
        x, w = sample_section(ctx_in.cone, ctx_in.phi, rng, 2)
        t = 10.0 ** rng.uniform(-6.0, 0.0)
        y = (1.0 - t) * x + t * w
        try:
            gx = normalized_apply(map_, ctx_out.phi, x)
            gy = normalized_apply(map_, ctx_out.phi, y)
        except MapAnnihilates:
            inadmissible += 1
            continue
        d_in = distance(ctx_in, x, y)
        d_out = distance(ctx_out, gx, gy)
        if math.isinf(d_out):
            inadmissible += 1
            continue
        if strict and d_in > STRICT_MIN_DISTANCE and abs(d_in - d_out) <= STRICT_AMBIGUITY:
            continue
        pairs += 1
        excess = d_out - d_in
        max_excess = max(max_excess, excess)
        if excess > NONEXPANSIVE_SLACK:
            violations += 1
            witness = witness or {"x": x.tolist(), "y": y.tolist(), "d_in": d_in, "d_out": d_out}
        if strict and d_in > STRICT_MIN_DISTANCE:
            strict_checked += 1
            if not d_out < d_in:
                strict_violations += 1
                witness = witness or {"x": x.tolist(), "y": y.tolist(), "d_in": d_in, "d_out": d_out}
    return NonexpansiveReport(pairs, max_excess, violations, strict_checked, strict_violations,
                              inadmissible, witness)
