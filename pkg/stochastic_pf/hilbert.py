"""
Hilbert-Birkhoff projective metric on Y = Σ_φ^K ∩ K°.

For a polyhedral cone the ratio functionals have the closed form
M(x/y) = max_i (Fx)_i/(Fy)_i and m(x/y) = min_i (Fx)_i/(Fy)_i, and
d(x, y) = log M(x/y) - log m(x/y). Distances are computed from log
differences so that d(x, y) and d(y, x) are bit-identical.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from stochastic_pf.cones import (
    ConeSpec,
    Functional,
    as_vector,
    contains,
    default_functional,
    interior_contains,
    sample_section,
)
from stochastic_pf.errors import BoundaryPoint, DimensionMismatch, NoAdmissibleSample, NotInCone

logger = logging.getLogger(__name__)

BISECTION_BRACKET = (1e-16, 1e16)
BISECTION_ITERATIONS = 200


@dataclass(frozen=True, eq=False)
class MetricContext:
    """A cone together with the interior dual functional fixing its section."""

    cone: ConeSpec
    phi: Functional

    def __post_init__(self):
        if self.phi.coefficients.shape != (self.cone.dimension,):
            raise DimensionMismatch(
                f"functional has shape {self.phi.coefficients.shape}, cone dimension is {self.cone.dimension}"
            )
        if not self.phi.is_interior_dual(self.cone):
            raise NotInCone("functional is not in the interior of the dual cone", self.phi.coefficients)

    @classmethod
    def for_cone(cls, cone: ConeSpec) -> "MetricContext":
        return cls(cone, default_functional(cone))


def _facet_values(ctx: MetricContext, x, y) -> Tuple[np.ndarray, np.ndarray]:
    u = as_vector(ctx.cone, x)
    w = as_vector(ctx.cone, y)
    if not contains(ctx.cone, u):
        raise NotInCone("x is outside the cone", u)
    if not contains(ctx.cone, w):
        raise NotInCone("y is outside the cone", w)
    if not interior_contains(ctx.cone, w):
        raise BoundaryPoint("y is on the cone boundary; the ratio is infinite")
    F = ctx.cone.facets
    return np.maximum(F @ u, 0.0), F @ w


def upper_ratio(ctx: MetricContext, x, y) -> float:
    """M(x/y) = inf{β > 0 : x ≤_K βy}."""
    fx, fy = _facet_values(ctx, x, y)
    return float((fx / fy).max())


def lower_ratio(ctx: MetricContext, x, y) -> float:
    """m(x/y) = sup{α > 0 : αy ≤_K x}."""
    fx, fy = _facet_values(ctx, x, y)
    return float((fx / fy).min())


def distance(ctx: MetricContext, x, y) -> float:
    """d(x, y) = log[M(x/y)/m(x/y)]; +inf when either point is on the boundary."""
    u = as_vector(ctx.cone, x)
    w = as_vector(ctx.cone, y)
    if not contains(ctx.cone, u):
        raise NotInCone("x is outside the cone", u)
    if not contains(ctx.cone, w):
        raise NotInCone("y is outside the cone", w)
    if not (interior_contains(ctx.cone, u) and interior_contains(ctx.cone, w)):
        return math.inf
    F = ctx.cone.facets
    log_ratio = np.log(F @ u) - np.log(F @ w)
    return max(float(log_ratio.max() - log_ratio.min()), 0.0)


def diameter(ctx: MetricContext, points: np.ndarray) -> float:
    """Largest pairwise distance among the rows of `points`."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[1] != ctx.cone.dimension:
        raise DimensionMismatch(f"points have dimension {P.shape[1]}, cone dimension is {ctx.cone.dimension}")
    if P.shape[0] < 2:
        return 0.0
    if not all(interior_contains(ctx.cone, p) for p in P):
        return math.inf
    L = np.log(ctx.cone.facets @ P.T)
    diff = L[:, :, None] - L[:, None, :]
    return max(float((diff.max(axis=0) - diff.min(axis=0)).max()), 0.0)


def orthant_distance_closed_form(x, y) -> float:
    """log[max_i(x_i/y_i) · max_j(y_j/x_j)] for strictly positive vectors."""
    u = np.asarray(x, dtype=float)
    w = np.asarray(y, dtype=float)
    if u.shape != w.shape or u.ndim != 1:
        raise DimensionMismatch(f"shapes {u.shape} and {w.shape} differ")
    if np.any(u <= 0.0) or np.any(w <= 0.0):
        raise NotInCone("closed form needs strictly positive coordinates")
    return float(np.log((u / w).max() * (w / u).max()))


def bisection_ratios(cone: ConeSpec, x, y, bracket=BISECTION_BRACKET, iterations=BISECTION_ITERATIONS):
    """Membership-bisection oracle for (M(x/y), m(x/y)), independent of the facet formula.

    Bisects log β over the bracket using only exact membership tests
    βy - x ∈ K and x - αy ∈ K.
    """
    u = as_vector(cone, x)
    w = as_vector(cone, y)
    F = cone.facets

    def member(v):
        return bool(np.all(F @ v >= 0.0))

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    a, b = lo, hi
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if member(math.exp(mid) * w - u):
            b = mid
        else:
            a = mid
    upper = math.exp(b)

    a, b = lo, hi
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if member(u - math.exp(mid) * w):
            a = mid
        else:
            b = mid
    lower = math.exp(a)
    return upper, lower


# ============================================================================
# Norm comparison ||x - y|| <= M (e^d - 1)
# ============================================================================

def norm_comparison_bound(ctx: MetricContext, pairs: Iterable) -> float:
    """max ||x - y||_inf / (e^{d(x,y)} - 1) over pairs with 0 < d < inf."""
    best = None
    for x, y in pairs:
        d = distance(ctx, x, y)
        if d == 0.0 or math.isinf(d):
            continue
        ratio = float(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)).max()) / math.expm1(d)
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise NoAdmissibleSample("no pair with a finite positive distance")
    return best


def norm_comparison_estimate(ctx: MetricContext, sample_count: int, rng_seed: int) -> float:
    """Monte-Carlo estimate M̂ of the norm-comparison constant over the section.

    Pairs mix far points with close ones (y on the segment towards x at
    log-uniform relative offsets) since the supremum is approached by close pairs.
    """
    if sample_count < 2:
        raise ValueError(f"sample_count must be >= 2, got {sample_count}")
    rng = np.random.default_rng(rng_seed)
    X = sample_section(ctx.cone, ctx.phi, rng, sample_count)
    W = sample_section(ctx.cone, ctx.phi, rng, sample_count)
    t = 10.0 ** rng.uniform(-4.0, 0.0, size=(sample_count, 1))
    Y = (1.0 - t) * X + t * W
    estimate = norm_comparison_bound(ctx, zip(X, Y))
    logger.debug(f"Norm comparison estimate {estimate:.6g} from {sample_count} pairs")
    return estimate
