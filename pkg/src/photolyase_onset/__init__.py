"""Photolyase binding kinetics and retrodiction of the binding onset time."""

from .assay import AliquotMeasurement, AssayProtocol, ps_from_counts, run_assay, schedule_withdrawals
from .errors import (
    ConvergenceError,
    DegenerateRateError,
    EstimationError,
    InputError,
    OnsetError,
    ParameterDomainError,
    SaturationError,
    UncertaintyError,
)
from .kinetics import (
    AVOGADRO,
    KineticsSample,
    ReactionParams,
    StochasticTrajectory,
    gillespie_simulate,
    half_life_pseudo_first,
    integrate_ode,
    ps_pseudo_first_order,
    ps_second_order_exact,
)
from .photon_budget import (
    OpticalParams,
    PhotonBudgetInput,
    PhotonBudgetReport,
    absorbance,
    conversion_fraction,
    dimer_sites,
    fraction_absorbed,
    required_photons,
    uv_pulse_from_gamma,
)
from .retrodict import (
    RetrodictionResult,
    bootstrap_ci,
    fit_pseudo_first,
    fit_second_order,
    retrodict,
    two_point_estimate,
)

__version__ = "0.1.0"
