"""stgibbs: spatio-temporal Gibbs point processes.

Simulation, composite-likelihood fitting, and global-envelope validation of
hybrid pairwise-interaction models with hard cores, on rectangular or masked
spatio-temporal observation windows.

The hot kernels run compiled (Cython) when the extension is available and
fall back to pure numpy otherwise; ``stgibbs.kernel_backend()`` reports
which. Results do not depend on the backend: the simulation chain is
reproducible draw for draw.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as _BACKEND
from .errors import ConfigError, DataError, NumericalError, STGibbsError
from .geometry import (
    DistancePair,
    PointPattern,
    STPoint,
    STWindow,
    close_pair_count,
    cyl_distance,
    interpoint_distance_pairs,
    neighbor_count,
    unit_cube,
)
from .infer import (
    CandidateFit,
    FitResult,
    HardcoreChoice,
    LogisticDesign,
    ParetoFront,
    Quadrature,
    build_logistic_design,
    choose_hardcore,
    fit_gibbs,
    fit_logistic,
    pareto_front,
    prepare_quadrature,
    select_irregular,
)
from .models import (
    CovariateStack,
    GibbsModel,
    GridGeometry,
    InteractionComponent,
    LogDensity,
    TrendModel,
    build_trend_field,
    cond_intensity,
    hardcore_indicator,
    homogeneous_trend,
    local_stability_bound,
    local_stability_log_bound,
    log_unnormalized_density,
    sufficient_stats,
    trend_intensity,
)
from .simulate import (
    MHConfig,
    default_mh_config,
    generate_dummies,
    run_birth_death_mh,
    sample_poisson,
    simulate_patterns,
)
from .streams import RNGStream, make_rng, spawn_rngs
from .summaries import (
    EnvelopeResult,
    GpcfSurface,
    default_bandwidths,
    envelope_test,
    erl_measures,
    erl_p_value,
    estimate_gpcf,
    global_envelope,
    pointwise_envelopes,
)


def kernel_backend() -> str:
    """Which kernel implementation is active: "compiled" or "python"."""
    return _BACKEND


__all__ = [
    "__version__",
    "kernel_backend",
    "STGibbsError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "STPoint",
    "STWindow",
    "PointPattern",
    "DistancePair",
    "unit_cube",
    "cyl_distance",
    "neighbor_count",
    "close_pair_count",
    "interpoint_distance_pairs",
    "GridGeometry",
    "CovariateStack",
    "TrendModel",
    "InteractionComponent",
    "GibbsModel",
    "LogDensity",
    "homogeneous_trend",
    "build_trend_field",
    "trend_intensity",
    "hardcore_indicator",
    "sufficient_stats",
    "cond_intensity",
    "log_unnormalized_density",
    "local_stability_bound",
    "local_stability_log_bound",
    "MHConfig",
    "default_mh_config",
    "sample_poisson",
    "generate_dummies",
    "run_birth_death_mh",
    "simulate_patterns",
    "RNGStream",
    "make_rng",
    "spawn_rngs",
    "LogisticDesign",
    "FitResult",
    "ParetoFront",
    "HardcoreChoice",
    "Quadrature",
    "CandidateFit",
    "build_logistic_design",
    "fit_logistic",
    "pareto_front",
    "choose_hardcore",
    "prepare_quadrature",
    "fit_gibbs",
    "select_irregular",
    "GpcfSurface",
    "EnvelopeResult",
    "default_bandwidths",
    "estimate_gpcf",
    "pointwise_envelopes",
    "erl_measures",
    "erl_p_value",
    "global_envelope",
    "envelope_test",
]
