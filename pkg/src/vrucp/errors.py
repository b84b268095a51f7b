"""Exception hierarchy shared across the package."""


class VrucpError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(VrucpError):
    """Operation inputs violate a documented precondition."""


class DegenerateInputError(VrucpError):
    """Geometric input has too little rank for the requested fit."""


class NumericalError(VrucpError):
    """An iterative scheme failed to converge."""


class SchemaError(VrucpError):
    """An input file is missing required columns or metadata."""


class DataError(VrucpError):
    """Rows of an otherwise well-formed file are invalid."""


class ConfigError(VrucpError):
    """A resolved configuration violates a documented constraint."""
