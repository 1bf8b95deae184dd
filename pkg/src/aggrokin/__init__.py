"""Numerical laboratory for an attractive birth-and-death particle model.

The package couples an exact event-driven simulation of the particle
system with grid solvers for its kinetic (mean-field) limit, and provides
the certificate arithmetic that separates the bounded (regulation) regime
from the unbounded (aggregation) regime.
"""

from .errors import (
    AggrokinError,
    CapacityError,
    ConfigurationError,
    ConsistencyError,
    ContractionError,
    DomainError,
    InsufficientDataError,
    IntegrationError,
    InvalidPotentialError,
    RegimeError,
    ResolutionError,
)
from .fields import Field, FieldPath, Grid, Region
from .lambertw import lambert_w, log_balance_root
from .potential import Potential, convolve, coverage, mass, mayer_mass, min_coverage
from .equilibria import (
    EquilibriumPair,
    GrowthCertificate,
    HorizonEstimate,
    ModelParams,
    balance_larger_root,
    balance_smaller_root,
    equilibrium_densities,
    existence_horizon,
    growth_speed,
    make_certificate,
    min_threshold,
    threshold_depth,
)
from .meso import (
    BoundedReport,
    ComparisonReport,
    FrontTrace,
    PicardSolution,
    StabilityReport,
    Trajectory,
    check_bounded,
    check_comparison,
    check_stability,
    contraction_window,
    front_trace,
    phi_map,
    rhs,
    rk4_step,
    solve,
    solve_path,
    solve_picard,
)
from .micro import (
    CompareReport,
    DensityEstimate,
    FluctuationReport,
    MicroTrajectory,
    PairCorrelationEstimate,
    ParticleSystem,
    estimate_density,
    estimate_pair_correlation,
    fluctuation_demo,
    init_poisson,
    micro_meso_compare,
    run_replicas,
)
from .fronts import (
    AsymptoteReport,
    FitReport,
    FrontRecurrence,
    StepGeometry,
    check_asymptote,
    fit_arrivals,
    front_min_threshold,
    front_recurrence,
    predicted_arrival,
    threshold_for_depth,
)
from .config import Config, load_config, parse_config_dict

__version__ = "0.1.0"
