"""
Cones - solid polyhedral cones, their orders, dual functionals and sections.

Every cone is held in facet form K = {x : Fx >= 0}. The orthant is F = I and
a simplicial cone G·R^n_+ is F = G^-1. Membership tests use a tolerance
relative to ||x||_inf and to the l1 norm of each facet row.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from stochastic_pf.errors import ConfigError, DegenerateCone, DimensionMismatch, NotInCone

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
MAX_CONDITION = 1e12


class ConeKind(str, Enum):
    ORTHANT = "orthant"
    POLYHEDRAL = "polyhedral"
    SIMPLICIAL = "simplicial"


class Order(str, Enum):
    INCOMPARABLE = "incomparable"
    EQUAL = "equal"
    LEQ_BOUNDARY = "leq_boundary"
    LT_INTERIOR = "lt_interior"


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """A solid proper polyhedral cone {x : Fx >= 0} in R^n."""

    kind: ConeKind
    facets: np.ndarray
    generators: Optional[np.ndarray] = None
    tol: float = DEFAULT_TOL
    condition_number: float = field(default=1.0)

    # ---------------------------------------------------------------------
    # Constructors
    # ---------------------------------------------------------------------

    @classmethod
    def orthant(cls, n: int, tol: float = DEFAULT_TOL) -> "ConeSpec":
        if int(n) < 1:
            raise DegenerateCone(f"orthant dimension must be positive, got {n}")
        eye = _frozen(np.eye(int(n)))
        return cls(ConeKind.ORTHANT, eye, eye, tol)

    @classmethod
    def simplicial(cls, generators, tol: float = DEFAULT_TOL) -> "ConeSpec":
        G = np.array(generators, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] < 1:
            raise DegenerateCone(f"generator matrix must be square, got shape {G.shape}")
        if not np.all(np.isfinite(G)):
            raise DegenerateCone("generator matrix has non-finite entries")
        cond = float(np.linalg.cond(G))
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise DegenerateCone(f"generator matrix is singular (condition number {cond:.3g})")
        return cls(ConeKind.SIMPLICIAL, _frozen(np.linalg.inv(G)), _frozen(G), tol, cond)

    @classmethod
    def polyhedral(cls, facets, tol: float = DEFAULT_TOL) -> "ConeSpec":
        F = np.array(facets, dtype=float)
        if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
            raise DegenerateCone(f"facet matrix must be 2-D, got shape {F.shape}")
        if not np.all(np.isfinite(F)):
            raise DegenerateCone("facet matrix has non-finite entries")
        n = F.shape[1]
        if np.linalg.matrix_rank(F) < n:
            raise DegenerateCone(f"facet matrix has rank < {n}; cone is not pointed")
        if not _is_solid(F):
            raise DegenerateCone("facet system {x : Fx > 0} is empty; cone is not solid")
        return cls(ConeKind.POLYHEDRAL, _frozen(F), None, tol)

    # ---------------------------------------------------------------------
    # Derived geometry
    # ---------------------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.facets.shape[1]

    @cached_property
    def row_scale(self) -> np.ndarray:
        return _frozen(np.abs(self.facets).sum(axis=1))

    @cached_property
    def rays(self) -> np.ndarray:
        """Extreme rays as rows, each scaled to ||r||_inf = 1."""
        if self.generators is not None:
            R = self.generators.T / np.abs(self.generators.T).max(axis=1, keepdims=True)
            return _frozen(R)
        return _frozen(_enumerate_rays(self.facets))

    def describe(self) -> dict:
        out = {"type": self.kind.value, "n": self.dimension}
        if self.kind is ConeKind.SIMPLICIAL:
            out["G"] = self.generators.tolist()
            out["condition_number"] = self.condition_number
        elif self.kind is ConeKind.POLYHEDRAL:
            out["F"] = self.facets.tolist()
        return out


def _is_solid(F: np.ndarray) -> bool:
    """LP: maximise s subject to Fx >= s, -1 <= x <= 1."""
    r, n = F.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-F, np.ones((r, 1))])
    bounds = [(-1.0, 1.0)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(r), bounds=bounds, method="highs")
    if res.status != 0:
        logger.warning(f"Solidity LP did not finish cleanly: {res.message}")
        return False
    return float(-res.fun) > 1e-9


def _enumerate_rays(F: np.ndarray) -> np.ndarray:
    """Extreme rays of {x : Fx >= 0}: null directions of (n-1)-row subsystems."""
    r, n = F.shape
    scale = np.abs(F).sum(axis=1)
    found = []
    for rows in itertools.combinations(range(r), n - 1):
        if n == 1:
            candidate = np.ones(1)
        else:
            sub = F[list(rows)]
            _, s, vt = np.linalg.svd(sub)
            if s.size < n - 1 or s[-1] <= 1e-10 * s[0]:
                continue
            candidate = vt[-1]
        for sign in (1.0, -1.0):
            ray = sign * candidate
            ray = ray / np.abs(ray).max()
            if np.all(F @ ray >= -1e-10 * scale):
                if not any(np.allclose(ray, other, atol=1e-9) for other in found):
                    found.append(ray)
                break
    if len(found) < n:
        raise DegenerateCone(f"found only {len(found)} extreme rays in dimension {n}")
    return np.array(found)


def cone_from_config(spec: dict, where: str = "cone") -> ConeSpec:
    """Build a cone from `{type: orthant, n}`, `{type: polyhedral, F}` or `{type: simplicial, G}`."""
    if not isinstance(spec, dict):
        raise ConfigError(where, "expected a table/object")
    kind = spec.get("type")
    tol = spec.get("tol", DEFAULT_TOL)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0.0:
        raise ConfigError(f"{where}.tol", "must be a positive number")
    try:
        if kind == "orthant":
            n = spec["n"]
            if isinstance(n, bool) or not isinstance(n, int):
                raise ConfigError(f"{where}.n", "must be a positive integer")
            return ConeSpec.orthant(n, float(tol))
        if kind == "polyhedral":
            return ConeSpec.polyhedral(spec["F"], float(tol))
        if kind == "simplicial":
            return ConeSpec.simplicial(spec["G"], float(tol))
    except ConfigError:
        raise
    except KeyError as e:
        raise ConfigError(f"{where}.{e.args[0]}", "missing required field")
    except DegenerateCone as e:
        raise ConfigError(where, str(e))
    except (TypeError, ValueError) as e:
        raise ConfigError(where, f"not a numeric cone description: {e}")
    raise ConfigError(f"{where}.type", f"unknown cone type {kind!r}")


# ============================================================================
# Functionals
# ============================================================================

@dataclass(frozen=True, eq=False)
class Functional:
    """The linear functional x -> <coefficients, x>."""

    coefficients: np.ndarray

    def __call__(self, x) -> float:
        return float(self.coefficients @ np.asarray(x, dtype=float))

    def is_interior_dual(self, cone: ConeSpec) -> bool:
        if self.coefficients.shape != (cone.dimension,):
            return False
        return bool(np.all(cone.rays @ self.coefficients > 0.0))


def default_functional(cone: ConeSpec) -> Functional:
    """phi = F^T 1, the sum of the facet normals; strictly positive on K minus {0}."""
    if np.linalg.matrix_rank(cone.facets) < cone.dimension:
        raise DegenerateCone("facet matrix is rank deficient")
    return Functional(_frozen(cone.facets.sum(axis=0)))


# ============================================================================
# Membership and order
# ============================================================================

def as_vector(cone: ConeSpec, x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (cone.dimension,):
        raise DimensionMismatch(f"expected a vector of dimension {cone.dimension}, got shape {v.shape}")
    return v


def contains(cone: ConeSpec, x) -> bool:
    v = as_vector(cone, x)
    scale = float(np.abs(v).max())
    return bool(np.all(cone.facets @ v >= -cone.tol * scale * cone.row_scale))


def interior_contains(cone: ConeSpec, x) -> bool:
    v = as_vector(cone, x)
    scale = float(np.abs(v).max())
    if scale == 0.0:
        return False
    return bool(np.all(cone.facets @ v > cone.tol * scale * cone.row_scale))


def order_classify(cone: ConeSpec, x, y) -> Order:
    """Classify y - x as in K interior (x <_K y), K boundary (x ≺_K y), zero, or neither."""
    u = as_vector(cone, x)
    w = as_vector(cone, y)
    diff = w - u
    scale = max(float(np.abs(u).max()), float(np.abs(w).max()))
    if float(np.abs(diff).max()) <= cone.tol * scale:
        return Order.EQUAL
    if interior_contains(cone, diff):
        return Order.LT_INTERIOR
    if contains(cone, diff):
        return Order.LEQ_BOUNDARY
    return Order.INCOMPARABLE


# ============================================================================
# Section geometry
# ============================================================================

def section_normalize(cone: ConeSpec, phi: Functional, x) -> np.ndarray:
    v = as_vector(cone, x)
    if not contains(cone, v):
        raise NotInCone("cannot normalise a point outside the cone", v)
    value = phi(v)
    if not value > 0.0:
        raise NotInCone("cannot normalise the zero vector onto the section", v)
    return v / value


def extreme_rays(cone: ConeSpec) -> np.ndarray:
    """Extreme rays of the cone as rows, ||r||_inf = 1."""
    return cone.rays


def section_vertices(cone: ConeSpec, phi: Functional) -> np.ndarray:
    """Extreme points of the section: the extreme rays scaled onto it (rows)."""
    R = cone.rays
    return R / (R @ phi.coefficients)[:, None]


def section_centroid(cone: ConeSpec, phi: Functional) -> np.ndarray:
    return section_vertices(cone, phi).mean(axis=0)


def section_bound(cone: ConeSpec, phi: Functional) -> float:
    """Upper bound on ||x||_inf over the section (attained at a vertex)."""
    return float(np.abs(section_vertices(cone, phi)).max())


def sample_section(cone: ConeSpec, phi: Functional, rng: np.random.Generator, count: int) -> np.ndarray:
    """Interior section points: random convex combinations of all section vertices."""
    V = section_vertices(cone, phi)
    weights = rng.exponential(size=(count, V.shape[0]))
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ V


def sample_face(cone: ConeSpec, phi: Functional, rng: np.random.Generator, count: int) -> np.ndarray:
    """Boundary section points: convex combinations of the vertices on one random facet."""
    V = section_vertices(cone, phi)
    on_facet = np.abs(cone.facets @ V.T) <= 1e-10 * cone.row_scale[:, None] * np.abs(V).max()
    usable = [i for i in range(cone.facets.shape[0]) if on_facet[i].any()]
    points = []
    for _ in range(count):
        face = on_facet[usable[rng.integers(len(usable))]]
        weights = rng.exponential(size=int(face.sum()))
        points.append(weights @ V[face] / weights.sum())
    return np.array(points).reshape(count, cone.dimension)
