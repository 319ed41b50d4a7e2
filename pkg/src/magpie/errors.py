"""Exception types raised by the library."""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class ConfigError(ValueError):
    """A parameter lies outside its admissible range."""


class DomainError(ValueError):
    """Input values lie outside the mathematical domain (e.g. negative intensities)."""


class NumericalGuardError(ArithmeticError):
    """An update would divide by zero."""
