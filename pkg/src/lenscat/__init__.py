"""Ray tracing, lens data and scattering-map comparison for compactly supported
time-dependent perturbations of the Euclidean metric."""

__version__ = "0.1.0"

from .cuspmap import (
    CuspBoundaryPoint,
    CuspSampling,
    LensReport,
    SojournGraphPoint,
    classical_scattering_map,
    cusp_to_entry,
    cusp_to_exit,
    graph_sweep,
    lens_equivalent,
    ray_to_cusp,
    truncated_map_via_infinity,
)
from .errors import (
    DegeneratePlane,
    LenscatError,
    MissesBall,
    NonPositiveDefinite,
    SpecError,
    StepFailure,
    SupportViolation,
    TrappedRay,
    ZeroMomentum,
)
from .flow import (
    ArcLength,
    CotangentState,
    ExitBall,
    PlaneCrossing,
    Trajectory,
    hamilton_rhs,
    integrate_batch,
    integrate_ray,
)
from .scattering import (
    BoundaryRay,
    BoundarySampling,
    LensTable,
    NonTrappingReport,
    ScatterResult,
    SojournLimit,
    check_non_trapping,
    geodesic_length,
    lens_sweep,
    scatter,
    scattering_relation,
    sojourn_closed,
    sojourn_limit,
)
