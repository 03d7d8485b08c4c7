"""
Solver - the random eigenpair (α(ω), x(ω)) by pullback iteration.

The normalised step f_k = D_{k-1}(·)/<φ_k, D_{k-1}(·)> is composed from ever
deeper in the past, f_0 f_-1 ... f_-m, and applied to probes on the section
of K_{-m-1}. The Hilbert diameter of the probe images at time 0 bounds the
distance to the fixed point ξ(ω) once the composite is strictly monotone.
From x(ω) = ξ(ω) the eigenvalue path follows by forward extension,
α_t = <φ_{t+1}, D_t x_t>.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from stochastic_pf.cones import (
    Functional,
    as_vector,
    interior_contains,
    section_centroid,
    section_normalize,
    section_vertices,
    sample_section,
)
from stochastic_pf.envpath import (
    INDEX_BUDGET,
    SEED_MODULUS,
    EnvironmentPath,
    cocycle_apply,
    cone_at,
    functional_at,
    step_at,
    strictly_positive_on_rays,
    _boundary_probes,
)
from stochastic_pf.errors import MapAnnihilates, NotConverged, NotInCone
from stochastic_pf.hilbert import MetricContext, diameter, distance, norm_comparison_estimate
from stochastic_pf.maps import MapInstance, apply, normalized_apply

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_DEPTH = 10_000
DEFAULT_CONFIRMATION_GAP = 5
NONLINEAR_STRICTNESS_BUDGET = 256
NO_STRICTNESS = "no strictness index ≤ max_depth"
DIAMETER_ABOVE_TOL = "diameter above tol at max_depth"


@dataclass(frozen=True)
class ProbePolicy:
    """Centroid, section extreme points and `n_random` seeded interior points per depth."""

    n_random: int = 8
    seed: int = 0
    include_extreme: bool = True


@dataclass
class PullbackTrace:
    probes_used: np.ndarray
    diameters: List[float]
    m_strict: Optional[int]
    strictness_certificate: str
    depth_reached: int
    x0: Optional[np.ndarray]
    converged: bool
    reason: str = ""

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "m_strict": self.m_strict,
            "strictness_certificate": self.strictness_certificate,
            "depth_reached": self.depth_reached,
            "final_diameter": self.diameters[-1] if self.diameters else None,
            "reason": self.reason,
        }


@dataclass
class EigenPairPath:
    times: np.ndarray
    x: np.ndarray
    alpha: np.ndarray
    residuals: np.ndarray

    @property
    def horizon(self) -> int:
        return int(self.alpha.shape[0])


@dataclass(frozen=True)
class LyapunovEstimate:
    mean: float
    stderr: float


@dataclass(frozen=True)
class UniquenessResult:
    distance: float
    tol: float
    passed: bool


@dataclass
class ConvergenceProfile:
    depths: List[int]
    gaps: List[float]
    norm_tolerance: float
    m_strict: Optional[int] = None

    def non_increasing_after(self, start: int, slack: float = 1e-12) -> bool:
        pairs = [(t, g) for t, g in zip(self.depths, self.gaps) if t >= start]
        return all(b <= a + slack for (_, a), (_, b) in zip(pairs, pairs[1:]))


@dataclass(frozen=True)
class FixedPointResult:
    x: np.ndarray
    iterations: int
    converged: bool
    last_step: float


def time0_context(env: EnvironmentPath) -> MetricContext:
    return MetricContext(cone_at(env, 0), functional_at(env, 0))


# ============================================================================
# f^(m) = f_0 f_-1 ... f_-m
# ============================================================================

def pullback_compose(env: EnvironmentPath, m: int, x, route: str = "steps") -> np.ndarray:
    """Image at index 0 of x ∈ K_{-m-1} under the m+1 normalised steps.

    route="steps" composes the normalised maps one at a time; route="cocycle"
    applies C(m+1, T^{-m-1}ω) and normalises once by φ_0. The two agree
    because every step is homogeneous.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    start = -m - 1
    v = as_vector(cone_at(env, start), x)
    if route == "steps":
        for k in range(start, 0):
            v = normalized_apply(step_at(env, k).map, functional_at(env, k + 1), v)
        return v
    if route == "cocycle":
        if float(np.abs(v).max()) == 0.0:
            raise NotInCone("the zero vector has no image on the section", v)
        image = cocycle_apply(env, start, m + 1, v)
        if math.isinf(image.log_scale) or not image.vector.any():
            raise MapAnnihilates("the composite annihilates x", v)
        return section_normalize(cone_at(env, 0), functional_at(env, 0), image.vector)
    raise ValueError(f"unknown route {route!r}")


def probe_points(env: EnvironmentPath, k: int, policy: ProbePolicy) -> np.ndarray:
    """Rows: section centroid of K_k, then its extreme points, then random interior points."""
    cone, phi = cone_at(env, k), functional_at(env, k)
    rows = [section_centroid(cone, phi)[None, :]]
    if policy.include_extreme:
        rows.append(section_vertices(cone, phi))
    if policy.n_random > 0:
        seq = np.random.SeedSequence(policy.seed % SEED_MODULUS, spawn_key=(k + env.offset + INDEX_BUDGET,))
        rows.append(sample_section(cone, phi, np.random.default_rng(seq), policy.n_random))
    return np.vstack(rows)


class _LinearPullback:
    """Keeps Q = A_-1 ··· A_-m-1 (rescaled) so each depth costs one matrix product."""

    certificate = "exact"

    def __init__(self, env: EnvironmentPath):
        self.env = env
        self.Q = np.eye(env.dimension)
        self.phi0 = functional_at(env, 0)

    def advance(self, m: int, probes: np.ndarray):
        self.Q = self.Q @ step_at(self.env, -m - 1).map.linear_matrix
        self.Q /= float(np.abs(self.Q).max()) or 1.0
        strict = strictly_positive_on_rays(cone_at(self.env, 0), self.Q, cone_at(self.env, -m - 1))
        images = probes @ self.Q.T
        values = images @ self.phi0.coefficients
        if np.any(values <= 0.0):
            return None, strict
        return images / values[:, None], strict


class _NonlinearPullback:
    """Recomposes the normalised steps for every probe at every depth.

    Section vertices go first and the centroid last, so a composite that
    annihilates a boundary probe is detected before any interior work.
    """

    certificate = "sampled"

    def __init__(self, env: EnvironmentPath):
        self.env = env
        self.cone0 = cone_at(env, 0)
        self.strict_seen = False

    def advance(self, m: int, probes: np.ndarray):
        images = np.empty_like(probes)
        try:
            for i in (*range(1, probes.shape[0]), 0):
                images[i] = pullback_compose(self.env, m, probes[i])
        except MapAnnihilates:
            return None, False
        if not self.strict_seen:
            self.strict_seen = all(
                interior_contains(self.cone0, cocycle_apply(self.env, -m - 1, m + 1, h).vector)
                for h in _boundary_probes(self.env, -m - 1, count=4)
            )
        return images, self.strict_seen


def pullback_solve(env: EnvironmentPath, tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_MAX_DEPTH,
                   probe_policy: ProbePolicy = ProbePolicy(),
                   confirmation_gap: int = DEFAULT_CONFIRMATION_GAP,
                   strictness_budget: Optional[int] = None) -> PullbackTrace:
    """Pull probes back from ever deeper indices until their images at time 0 agree.

    Stops at the first depth m with ρ̂(m - gap), ..., ρ̂(m) all <= tol and
    m - gap >= m_strict. Non-convergence is returned as a trace with a reason.

    `strictness_budget` bounds the number of depths searched for a strict
    composite; once it is spent without one the solve stops. It defaults to
    max_depth for linear families and to NONLINEAR_STRICTNESS_BUDGET for
    nonlinear ones, whose per-depth cost grows with the depth.
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    ctx0 = time0_context(env)
    linear = env.scenario.is_linear
    engine = _LinearPullback(env) if linear else _NonlinearPullback(env)
    if strictness_budget is None:
        strictness_budget = max_depth + 1 if linear else NONLINEAR_STRICTNESS_BUDGET
    if strictness_budget < 1:
        raise ValueError(f"strictness_budget must be >= 1, got {strictness_budget}")
    diameters: List[float] = []
    m_strict: Optional[int] = None
    images = probes = None
    below_since: Optional[int] = None

    for m in range(max_depth + 1):
        probes = probe_points(env, -m - 1, probe_policy)
        images, strict_now = engine.advance(m, probes)
        rho = math.inf if images is None else diameter(ctx0, images)
        diameters.append(rho)
        if m_strict is None and strict_now:
            m_strict = m + 1
            logger.debug(f"Composite of {m_strict} steps is strictly monotone ({engine.certificate})")
        logger.debug(f"depth {m}: diameter {rho:.3e}")

        if m_strict is not None and m >= m_strict and rho <= tol:
            if below_since is None:
                below_since = m
            if m - below_since >= confirmation_gap:
                x0 = images[0]
                if not interior_contains(ctx0.cone, x0):
                    raise NotInCone("converged point is on the boundary of K_0", x0)
                logger.info(f"Pullback converged at depth {m} (m_strict={m_strict}, diameter {rho:.3e})")
                return PullbackTrace(probes, diameters, m_strict, engine.certificate, m, x0, True)
        elif below_since is not None:
            logger.warning(f"Diameter rose above tol at depth {m} after a plateau at {below_since}")
            below_since = None

        if m_strict is None and m + 1 >= strictness_budget and m < max_depth:
            logger.warning(f"No strict composite within {strictness_budget} depths; stopping at depth {m}")
            return PullbackTrace(probes, diameters, None, engine.certificate, m,
                                 None if images is None else images[0], False, NO_STRICTNESS)

    reason = NO_STRICTNESS if m_strict is None else DIAMETER_ABOVE_TOL
    logger.warning(f"Pullback did not converge within depth {max_depth}: {reason}")
    x0 = None if images is None else images[0]
    return PullbackTrace(probes, diameters, m_strict, engine.certificate, max_depth, x0, False, reason)


# ============================================================================
# Forward extension and the eigenvalue path
# ============================================================================

def forward_extend(env: EnvironmentPath, x0, horizon: int) -> EigenPairPath:
    """x_{t+1} = g_t(x_t), α_t = <φ_{t+1}, D_t x_t>, residuals of α_t x_{t+1} = D_t x_t."""
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    cone0, phi0 = cone_at(env, 0), functional_at(env, 0)
    x = as_vector(cone0, x0)
    if not interior_contains(cone0, x):
        raise NotInCone("x0 must lie in the interior of K_0", x)
    if abs(phi0(x) - 1.0) > 1e-12:
        raise NotInCone("x0 must lie on the section <φ_0, x> = 1", x)

    xs = np.empty((horizon + 1, env.dimension))
    alpha = np.empty(horizon)
    residuals = np.empty(horizon)
    xs[0] = x
    for t in range(horizon):
        step = step_at(env, t)
        image = apply(step.map, xs[t])
        a = functional_at(env, t + 1)(image)
        if not a > 0.0:
            raise MapAnnihilates(f"D_{t}(x_{t}) = 0 on the eigen path", xs[t])
        xs[t + 1] = image / a
        residuals[t] = float(np.abs(a * xs[t + 1] - apply(step.map, xs[t])).max())
        alpha[t] = a
    return EigenPairPath(np.arange(horizon + 1), xs, alpha, residuals)


def lyapunov_estimate(path: EigenPairPath) -> LyapunovEstimate:
    """Mean of log α_t with a batch-means standard error."""
    H = path.horizon
    if H < 1:
        raise ValueError("the eigen path needs at least one step")
    if np.any(path.alpha <= 0.0):
        raise ValueError("non-positive α on the eigen path; the path is corrupt")
    logs = np.log(path.alpha)
    mean = float(logs.mean())
    if H == 1:
        return LyapunovEstimate(mean, 0.0)
    batch = max(int(math.sqrt(H)), 1)
    count = H // batch
    if count >= 2:
        means = logs[: count * batch].reshape(count, batch).mean(axis=1)
        stderr = float(means.std(ddof=1) / math.sqrt(count))
    else:
        stderr = float(logs.std(ddof=1) / math.sqrt(H))
    return LyapunovEstimate(mean, stderr)


# ============================================================================
# Uniqueness, uniform convergence, fixed-point equation
# ============================================================================

def uniqueness_check(env: EnvironmentPath, tol: float, max_depth: int,
                     policy_a: ProbePolicy, policy_b: ProbePolicy) -> UniquenessResult:
    """Hilbert distance between the solutions of two independently probed solves."""
    first = pullback_solve(env, tol, max_depth, policy_a)
    second = pullback_solve(env, tol, max_depth, policy_b)
    for trace in (first, second):
        if not trace.converged:
            raise NotConverged(f"uniqueness check needs converged runs: {trace.reason}", trace)
    d = distance(time0_context(env), first.x0, second.x0)
    return UniquenessResult(d, tol, d <= 3.0 * tol)


def uniform_convergence_profile(env: EnvironmentPath, trace: PullbackTrace, depths: Sequence[int],
                                probe_count: int = 8, seed: int = 0, tol: float = DEFAULT_TOL,
                                norm_samples: int = 2000) -> ConvergenceProfile:
    """sup over probes a ∈ K_-t of ||C(t, T^-t ω)a / <φ_0, C(t, T^-t ω)a> - x0||_inf, per t."""
    if not trace.converged:
        raise NotConverged(f"profile needs a converged solution: {trace.reason}", trace)
    phi0 = functional_at(env, 0)
    gaps = []
    for t in depths:
        probes = probe_points(env, -t, ProbePolicy(n_random=probe_count, seed=seed))
        worst = 0.0
        for a in probes:
            image = cocycle_apply(env, -t, t, a)
            value = phi0(image.vector)
            if math.isinf(image.log_scale) or not value > 0.0:
                worst = math.inf
                break
            worst = max(worst, float(np.abs(image.vector / value - trace.x0).max()))
        gaps.append(worst)
    constant = norm_comparison_estimate(time0_context(env), norm_samples, seed % SEED_MODULUS)
    return ConvergenceProfile(list(depths), gaps, constant * math.expm1(tol), trace.m_strict)


def fixed_point_residual(env: EnvironmentPath, tol: float, max_depth: int,
                         policy: ProbePolicy = ProbePolicy()) -> float:
    """d_0(f_0(x_-1), x_0): the equation ξ(Tω) = f(ω, ξ(ω)) checked between bases -1 and 0."""
    here = pullback_solve(env, tol, max_depth, policy)
    before = pullback_solve(env.shift(-1), tol, max_depth, policy)
    for trace in (here, before):
        if not trace.converged:
            raise NotConverged(f"fixed-point check needs converged runs: {trace.reason}", trace)
    pushed = normalized_apply(step_at(env, -1).map, functional_at(env, 0), before.x0)
    return distance(time0_context(env), pushed, here.x0)


def forward_fixed_point(map_: MapInstance, phi: Functional, x, tol: float = 1e-12,
                        max_iter: int = 10_000) -> FixedPointResult:
    """Iterate g(x) = D(x)/<φ, D(x)> of a self-map to its unique fixed point.

    The deterministic contraction principle behind the pullback solver: a
    strictly non-expansive map of a compact section has one fixed point and
    every orbit converges to it.
    """
    if map_.cone_in.dimension != map_.cone_out.dimension:
        raise ValueError("forward iteration needs a self-map")
    ctx = MetricContext(map_.cone_out, phi)
    v = section_normalize(map_.cone_in, phi, x)
    step = math.inf
    for i in range(1, max_iter + 1):
        nxt = normalized_apply(map_, phi, v)
        step = distance(ctx, nxt, v) if interior_contains(ctx.cone, v) else math.inf
        v = nxt
        if step <= tol:
            return FixedPointResult(v, i, True, step)
    return FixedPointResult(v, max_iter, False, step)
