"""Stochastic dynamic programming under empirical measures.

Solves finite- and infinite-horizon dynamic programming equations on interval
grids for sample-based (empirical) outcome distributions, measures how the
solved value functions move in an Attouch-Wets metric as the sample count
grows, and packages the revenue-management example models plus their pointwise
bound envelopes and tail diagnostics behind a reproducible experiment CLI.
"""

from .errors import (
    ConfigError,
    DomainError,
    EnvelopeError,
    EpidpError,
    EvaluationError,
    ModelError,
    NonIntegrableReferenceError,
    ParameterError,
    ShapeMismatchError,
    SingularRegressorError,
    SpecError,
)
from .measures import (
    Ar1Fit,
    DistributionSpec,
    Empirical,
    EmpiricalMeasure,
    Exponential,
    Levy,
    LogNormal,
    Normal,
    PointMass,
    SampleStream,
    Uniform,
    ar1_ols_fit,
    ar1_simulate,
    bounded_lipschitz_distance,
    empirical_from_samples,
    expectation,
    parse_distribution,
    sample,
    truncated_lower_expectation,
    truncated_upper_expectation,
)
from .valuefn import (
    EpigraphPoint,
    Grid1D,
    Grid2D,
    ValueFn1D,
    ValueFn2D,
    convexity_defect,
    epigraph_distance,
    epigraph_distance_2d,
    evaluate,
    lipschitz_moduli,
    saddle_defect,
    sup_norm_diff,
    value_fn_from_csv,
    value_fn_to_csv,
)
from .aw import AWConfig, AWResult, aw_distance, aw_distance_2d, aw_domain_sensitivity
from .bellman import (
    DecisionTable,
    InnerMin,
    SellDownQuadratic1D,
    SellDownQuadratic2D,
    StageModel,
    TailDiagnostic,
    apply_bellman,
    extract_policy,
    inner_min,
    monotone_trend,
    tail_diagnostics,
)
from .solvers import (
    ConsistencyRecord,
    SolveConfig,
    SolveReport,
    consistency_sweep,
    quadrature_measure,
    reference_solution,
    solve_finite,
    solve_infinite,
)
from .econ import (
    Ar1ModelSpec,
    Ar1Record,
    BoundEnvelope,
    QuadraticStorageCost,
    RevenueModelSpec,
    ar1_bound_envelope,
    ar1_experiment,
    ar1_grid,
    build_ar1_model,
    build_revenue_model,
    fig1_series,
    hold_everything_objective,
    levy_experiment,
    revenue_bound_envelope,
    revenue_grid,
)

__version__ = "0.1.0"
