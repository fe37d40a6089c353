"""Exception hierarchy shared by all modules."""


class MarkovAdmmError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MarkovAdmmError):
    """Invalid input data or configuration."""


class ParseError(ValidationError):
    """A file could not be parsed (malformed JSON, missing fields)."""


class DisconnectedError(ValidationError):
    """The graph is not connected."""


class SchemaError(ValidationError):
    """Config file violates the schema; carries the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InvalidDistribution(ValidationError):
    """Target distribution is nonpositive or not normalized."""


class InvalidAlpha(ValidationError):
    """Random-walk step probability outside (0, 1/2)."""


class InvalidDual(ValidationError):
    """Initial dual violates antisymmetry or the oriented-incidence range."""


class InvalidTransition(ValidationError):
    """Chain transition with zero probability / no supporting edge."""


class DegenerateSeries(ValidationError):
    """Too few points after burn-in to fit a rate."""


class NumericalError(MarkovAdmmError):
    """A numerical routine failed to converge or produced garbage."""


class NonFiniteError(NumericalError):
    """NaN or infinity encountered where a finite value is required."""


class SolverDivergence(NumericalError):
    """Inner Newton solver failed its line search repeatedly."""


class PeriodicChainError(NumericalError):
    """Chain is periodic: no geometric mixing rate below one exists."""


class InconsistentKKT(NumericalError):
    """Dual reconstruction left a residual that should be impossible."""


class AperiodicityWarning(UserWarning):
    """Constructed chain is periodic; mixing-rate computations will fail."""
