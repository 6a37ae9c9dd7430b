"""Exception types raised across the compile and run pipeline."""


class FDError(Exception):
    """Base class for every error raised by fdgen."""


class ParseError(FDError, SyntaxError):
    """Malformed equation string: bad token, unbalanced parentheses, unknown head."""


class ArityError(FDError, TypeError):
    """A special function received the wrong number of arguments."""


class CycleError(FDError):
    """Recursive substitutions or circular formula dependencies."""


class EinsteinIndexError(FDError, IndexError):
    """Inconsistent Einstein index structure (repeated >2 times, mismatched free sets)."""


class NestingError(FDError):
    """A differentiation variable that is neither a coordinate nor time."""


class ShapeError(FDError, ValueError):
    """An operand does not have the shape an operator requires."""


class DimensionError(FDError, ValueError):
    """Lists whose lengths disagree with the problem dimension."""


class DuplicateNameError(FDError, ValueError):
    """A work array name is already in use on a grid."""


class UnknownFieldError(FDError):
    """A field is read that is neither prognostic nor defined by a formula."""


class UnassignedDerivativeError(FDError):
    """A derivative leaf has no temporary work array assigned."""


class UnsupportedConstruct(FDError, NotImplementedError):
    """An expression form with no discrete or C lowering."""


class FootprintViolation(FDError, IndexError):
    """A kernel access falls outside the padded extent of an array."""


class NumericalBlowup(FDError, FloatingPointError):
    """A prognostic field became non-finite."""

    def __init__(self, step: int, field: str):
        super().__init__(f"non-finite values in {field!r} at timestep {step}")
        self.step = step
        self.field = field


class ConfigError(FDError, ValueError):
    """Invalid setup document. ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class SymbolError(ConfigError):
    """Symbols used in equations that are not declared anywhere."""

    def __init__(self, symbols):
        self.symbols = tuple(sorted(symbols))
        super().__init__("problem", "undeclared symbols: " + ", ".join(self.symbols))


class SnapshotIOError(FDError, OSError):
    """Failure reading or writing snapshot / diagnostics files."""


class ScheduleError(FDError):
    """A kernel reads array points that no earlier step has made valid."""
