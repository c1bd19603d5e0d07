"""Exception hierarchy shared by all finite_proxy modules."""


class FiniteProxyError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FiniteProxyError, ValueError):
    """Invalid argument values (nonpositive lengths, out-of-range points, ...)."""


class NonresonanceError(FiniteProxyError):
    """A d'Alembertian symbol value is too close to zero on a retained mode."""

    def __init__(self, message, offending=None, suggested_period=None):
        super().__init__(message)
        self.offending = offending or []
        self.suggested_period = suggested_period


class CapacityError(FiniteProxyError):
    """Requested cutoff exceeds what the working mode set can hold."""


class ResolutionError(FiniteProxyError):
    """Grid resolution violates the anti-aliasing guard."""


class NonContractionError(FiniteProxyError):
    """Tail iteration failed to contract."""

    def __init__(self, message, observed_ratio=None, iterations=None):
        super().__init__(message)
        self.observed_ratio = observed_ratio
        self.iterations = iterations


class SolverError(FiniteProxyError):
    """Newton/Picard solve diverged; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class DegenerateSpectrumError(FiniteProxyError):
    """Repeated eigenvalues: reconstruction theorem requires distinctness."""


class ReconstructionError(FiniteProxyError):
    """Chain recovery failed (non-persymmetric input or infeasible sweep)."""


class ConfigError(FiniteProxyError):
    """Configuration file failed to parse or validate."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{message} (at {location})")
        self.location = location
