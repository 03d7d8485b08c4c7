"""
stochastic_pf - random Perron-Frobenius eigenpairs of monotone homogeneous maps.

Cones and their Hilbert metric, map families with monotonicity checks,
seeded environment paths with their cocycle, and the pullback solver for
the random eigenpair (α(ω), x(ω)) with its diagnostics.
"""

from stochastic_pf.cones import (
    ConeSpec,
    Functional,
    Order,
    contains,
    default_functional,
    extreme_rays,
    interior_contains,
    order_classify,
    sample_face,
    sample_section,
    section_bound,
    section_centroid,
    section_normalize,
    section_vertices,
)
from stochastic_pf.envpath import (
    EnvironmentPath,
    Scenario,
    StepTriple,
    cocycle_apply,
    cocycle_matrix,
    cone_at,
    functional_at,
    pullback_strictness_depth,
    shift,
    step_at,
    strictness_index,
)
from stochastic_pf.errors import (
    BoundaryPoint,
    ConfigError,
    DegenerateCone,
    DimensionMismatch,
    IndexBudgetExceeded,
    MapAnnihilates,
    NoAdmissibleSample,
    NotConverged,
    NotInCone,
    StochasticPFError,
)
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
from stochastic_pf.maps import (
    MapFamily,
    MapInstance,
    MonotoneClass,
    apply,
    check_homogeneity,
    check_nonexpansive,
    check_superadditivity,
    classify_monotonicity,
    normalized_apply,
)
from stochastic_pf.solver import (
    EigenPairPath,
    ProbePolicy,
    PullbackTrace,
    fixed_point_residual,
    forward_extend,
    forward_fixed_point,
    lyapunov_estimate,
    pullback_compose,
    pullback_solve,
    uniform_convergence_profile,
    uniqueness_check,
)

__all__ = [
    # cones
    'ConeSpec', 'Functional', 'Order', 'contains', 'default_functional', 'extreme_rays',
    'interior_contains', 'order_classify', 'sample_face', 'sample_section', 'section_bound',
    'section_centroid', 'section_normalize', 'section_vertices',
    # hilbert
    'MetricContext', 'bisection_ratios', 'diameter', 'distance', 'lower_ratio',
    'norm_comparison_bound', 'norm_comparison_estimate', 'orthant_distance_closed_form', 'upper_ratio',
    # maps
    'MapFamily', 'MapInstance', 'MonotoneClass', 'apply', 'check_homogeneity', 'check_nonexpansive',
    'check_superadditivity', 'classify_monotonicity', 'normalized_apply',
    # envpath
    'EnvironmentPath', 'Scenario', 'StepTriple', 'cocycle_apply', 'cocycle_matrix', 'cone_at',
    'functional_at', 'pullback_strictness_depth', 'shift', 'step_at', 'strictness_index',
    # solver
    'EigenPairPath', 'ProbePolicy', 'PullbackTrace', 'fixed_point_residual', 'forward_extend',
    'forward_fixed_point', 'lyapunov_estimate', 'pullback_compose', 'pullback_solve',
    'uniform_convergence_profile', 'uniqueness_check',
    # errors
    'StochasticPFError', 'BoundaryPoint', 'ConfigError', 'DegenerateCone', 'DimensionMismatch',
    'IndexBudgetExceeded', 'MapAnnihilates', 'NoAdmissibleSample', 'NotConverged', 'NotInCone',
]
