"""Maslov-index stability analysis for standing waves of fourth-order NLS."""

from .bundles import (
    DEFAULT_CONFIG,
    BundlePath,
    CrossingLocation,
    Edge,
    IntegrationConfig,
    detection_function,
    integrate_stable,
    integrate_unstable,
    locate_conjugate_points,
    locate_lambda_crossings,
)
from .errors import (
    MaslovError,
    ParameterError,
    ProfileParseError,
    ProfileValidationError,
    DomainError,
    DegeneracyError,
    IntegrationError,
    SmoothnessError,
    NonConvergenceError,
    PreconditionError,
    SolverError,
    DegenerateCaseError,
    InconsistencyError,
)
from .forms import (
    CrossingFormSeries,
    OrderForm,
    contribution,
    crossing_form_series,
    maslov_index,
    omega,
    partial_signatures,
)
from .maslovbox import (
    MaslovBoxConfig,
    StabilityReport,
    VKVerdict,
    assemble_report,
    corner_contribution,
    jones_grillakis_unstable,
    lower_bound,
    morse_index,
    vk_verdict,
)
from .profiles import (
    Parameters,
    SampledProfile,
    SechPowerProfile,
    WaveProfile,
    ZeroProfile,
    kh_profile,
    load_sampled_profile,
    power_law_profile,
)
from .solves import CorrectionData, Discretization, compute_integrals, correction_term, solve_inhomogeneous
from .systems import Kind, LinearSystem, essential_spectrum, stable_frame, unstable_frame

__version__ = "0.1.0"
