"""Exception taxonomy.  The CLI maps these onto exit codes: configuration
problems exit 2, numerical failures (solver, geometry, assumptions,
degenerate inputs) exit 3, failed acceptance checks exit 1."""


class HomlabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HomlabError):
    """Unknown names, malformed configs, unsupported option combinations."""


class AssumptionViolationError(HomlabError):
    """A coefficient field violates ellipticity, symmetry or periodicity."""


class GeometryError(HomlabError):
    """A ball or annulus does not fit inside the computational domain."""


class ResolutionError(HomlabError):
    """The grid does not resolve the coefficient oscillation (h > eps/8)."""


class SolverError(HomlabError):
    """Iterative solver failed to reach the requested residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateInputError(HomlabError):
    """An input field vanishes where the operation needs it to be nonzero."""


class InternalConsistencyError(HomlabError):
    """A computed object violates one of its own invariants."""
