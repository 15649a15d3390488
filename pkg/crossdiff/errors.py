"""Exception hierarchy shared by the library and the command line."""

from typing import Optional


class CrossDiffError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it"""

    exit_code = 1


class ConfigError(CrossDiffError):
    exit_code = 2


class ConfigParseError(ConfigError):
    """Config text is not well-formed JSON"""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ConfigValidationError(ConfigError, ValueError):
    """A key is unknown, misspelled or carries an invalid value"""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class MissingParameter(ConfigError):
    def __init__(self, symbol: str):
        super().__init__(f"missing parameter '{symbol}'")
        self.symbol = symbol


class NumericalError(CrossDiffError):
    exit_code = 3


class GridError(NumericalError, ValueError):
    pass


class NonFiniteField(NumericalError, ValueError):
    pass


class DivisionByVanishingDenominator(NumericalError):
    pass


class NegativityBreach(NumericalError):
    """The state left the nonnegative cone beyond round-off"""

    def __init__(self, message: str, time: float, minimum: float):
        super().__init__(f"{message} at t={time:.17g} (min={minimum:.6g})")
        self.time = time
        self.minimum = minimum


class NonFiniteState(NumericalError):
    def __init__(self, time: float):
        super().__init__(f"non-finite state at t={time:.17g}")
        self.time = time


class NoInteriorEquilibrium(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class UncertifiedEquilibrium(NumericalError):
    pass


class SweepError(NumericalError):
    """An integration inside a sweep failed; ``value`` is the offending knob"""

    def __init__(self, knob: str, value: float, cause: Exception):
        super().__init__(f"{knob}={value:.17g}: {cause}")
        self.knob = knob
        self.value = value
        self.cause: Optional[Exception] = cause


class FitError(NumericalError, ValueError):
    pass


class OutputError(CrossDiffError):
    exit_code = 4
