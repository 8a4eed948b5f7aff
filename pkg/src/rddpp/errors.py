"""Exception types shared across the package."""


class RddppError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RddppError, ValueError):
    """Malformed data: non-finite entries, shape mismatches, bad files."""


class InvalidArgumentError(RddppError, ValueError):
    """An argument is outside its documented range."""


class EmptyClassError(InvalidInputError):
    """A class-conditional operation was asked about an empty class."""


class NumericalError(RddppError, ArithmeticError):
    """A computation left the numerically trustworthy regime."""


class InstanceTooLargeError(InvalidArgumentError):
    """An exhaustive oracle was asked to enumerate too large an instance."""


class ConfigurationError(RddppError, ValueError):
    """Incompatible configuration, e.g. a strategy missing a required input."""


class DegenerateModelError(RddppError, ValueError):
    """Training data cannot support a model (e.g. a single class)."""


class ParseError(InvalidInputError):
    """A file violated the expected format; message names the location."""
