"""Exception hierarchy shared by the kinetics, assay and fitting modules."""


class OnsetError(Exception):
    """Base class for all errors raised by this package."""


class ParameterDomainError(OnsetError, ValueError):
    """A physical parameter is outside its admissible domain."""


class InputError(OnsetError, ValueError):
    """Malformed or insufficient input (grids, measurement lists, tags)."""


class EstimationError(OnsetError):
    """An estimator could not produce a value from the given data."""


class DegenerateRateError(EstimationError):
    """Two measurements carry the same signal, so no rate can be inferred."""


class SaturationError(EstimationError):
    """A measurement sits at or above the bound-photolyase ceiling."""


class ConvergenceError(EstimationError):
    """Iterative fit failed to converge or hit a singular system.

    ``trace`` holds one dict per iteration (parameters, cost, damping).
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class UncertaintyError(EstimationError):
    """Too many bootstrap refits failed to form a confidence interval."""
