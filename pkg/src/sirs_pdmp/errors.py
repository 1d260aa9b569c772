"""Exception taxonomy for the package.

Every error raised by the library derives from :class:`SirsPdmpError`, so
callers (and the CLI exit-code mapping) can distinguish configuration
problems, model-structure problems, and numerical failures.
"""


class SirsPdmpError(Exception):
    """Base class for all package errors."""


class ConfigError(SirsPdmpError):
    """Invalid or inconsistent run configuration."""


class DomainError(SirsPdmpError, ValueError):
    """An argument lies outside the operation's admissible domain."""


class InvalidIncidenceError(SirsPdmpError):
    """Incidence function violates its structural requirements."""


class InvalidRateError(SirsPdmpError):
    """A transition rate is negative where it must be nonnegative."""


class InvalidGeneratorError(SirsPdmpError):
    """Matrix is not a valid CTMC generator (row sums, shape)."""


class ReducibleChainError(SirsPdmpError):
    """The jump chain is not irreducible."""


class NumericsError(SirsPdmpError):
    """A numerical routine failed to converge or stay stable."""


class StiffnessError(NumericsError):
    """Adaptive step size underflowed; the problem looks stiff."""


class NoEndemicEquilibriumError(SirsPdmpError):
    """Requested endemic equilibrium does not exist (subsystem ratio <= 1)."""


class NotPersistentError(SirsPdmpError):
    """Persistence bound requested but the weighted drift is not positive."""


class GammaSeedError(SirsPdmpError):
    """No regime admits an endemic equilibrium to seed the reachable set."""


class HistogramMismatchError(SirsPdmpError):
    """Occupation histograms have incompatible binning."""
