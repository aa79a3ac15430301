"""Exception hierarchy shared by all modules."""


class MaslovError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(MaslovError, ValueError):
    """Parameters violate the hyperbolicity conditions."""


class ProfileParseError(MaslovError, ValueError):
    """A sampled profile file could not be parsed."""


class ProfileValidationError(MaslovError, ValueError):
    """A sampled profile parsed but is unusable (ordering, size)."""


class DomainError(MaslovError, ValueError):
    """Spectral parameter lies in the essential spectrum."""


class DegeneracyError(MaslovError, ArithmeticError):
    """Asymptotic matrix is defective or a frame is not a graph."""


class IntegrationError(MaslovError, RuntimeError):
    """Frame propagation failed."""


class SmoothnessError(MaslovError, ValueError):
    """Requested derivative order exceeds what the profile provides."""


class NonConvergenceError(MaslovError, RuntimeError):
    """A crossing-form series failed to close."""


class PreconditionError(MaslovError, ValueError):
    """An operation was called at a point where its precondition fails."""


class SolverError(MaslovError, RuntimeError):
    """Inhomogeneous solve failed or lost accuracy."""


class DegenerateCaseError(MaslovError, ValueError):
    """I1 or I2 vanishes, so the corner needs a higher-order calculation."""


class InconsistencyError(MaslovError, RuntimeError):
    """Two independent computations of the same integer disagree."""
