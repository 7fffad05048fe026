"""Load distribution of base stations in Poisson wireless networks."""

from .errors import (
    BudgetExceeded,
    CellTouchesWindow,
    ConfigError,
    DegenerateSamples,
    Diverges,
    DomainError,
    NoConvergence,
    NonConvergent,
    NoRoot,
    NotACharacteristicFunction,
    NumericOverflow,
    PalmLoadError,
    StrategyMismatch,
    Unstable,
)
from .geometry import (
    CellRealization,
    PointSet,
    Window,
    covered_area,
    covered_area_pair,
    lens_area,
    sample_ppp,
    sample_typical_cell,
)
from .line import line_laplace_affine, line_laplace_no_interf, line_mean_load, line_transform
from .numerics import QuadratureSpec, expectation_via_transform, integrate
from .plane import (
    ConditionalExpectationStrategy,
    elastic_interference_limited,
    elastic_low_sinr_bound,
    plane_mean_load,
    plane_mean_load_affine,
    plane_moment_general,
    plane_second_moment,
)
from .shotnoise import (
    ExclusionRegion,
    MarkModel,
    PropagationModel,
    conditional_covariance,
    conditional_moments,
    gaussian_limit_params,
    laplace_transform,
)
from .simulator import (
    GammaFit,
    LoadSamples,
    SimConfig,
    balance_edge_threshold,
    fit_gamma_moments,
    integrate_load_over_cell,
    qq_points,
    reuse_sweep,
    simulate_integrands,
    simulate_load_distribution,
    stationary_from_palm,
)
from .traffic import (
    LoadIntegrand,
    RateModel,
    ReuseScheme,
    TrafficSpec,
    build_integrand,
    data_rate,
    erlang_b,
    reference_elastic,
    reference_propagation,
    sinr,
)

__version__ = "0.1.0"
