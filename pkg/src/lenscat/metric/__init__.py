"""Metric fields, diffeomorphisms, pullbacks and convexity diagnostics."""

from .diffeo import (
    ComposedDiffeo,
    DiffeoField,
    FlowDiffeo,
    IdentityDiffeo,
    SwirlDiffeo,
    compose,
    diffeo_report,
)
from .fields import (
    CallableMetric,
    ConformalBump,
    FlatMetric,
    MetricField,
    PullbackMetric,
    RankOneBump,
    TabulatedMetric,
    christoffel,
    christoffel_from,
    eval_metric,
    pullback,
    support_deviation,
)
from .geometry import (
    AdmissibilityGrid,
    AdmissibilityReport,
    admissibility_report,
    covariant_hessian,
    hessian_min_eig,
    riemann,
    sectional_curvature,
)
from .scalar import LinearFunction, PulledBackFunction, QuadraticFunction, ScalarField
from .specio import (
    diffeo_from_spec,
    function_from_spec,
    load_diffeo,
    load_function,
    load_metric,
    metric_from_spec,
    save_tabulated,
)
