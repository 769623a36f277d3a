"""Exception types shared across the package."""


class RMFError(Exception):
    """Base class for all package errors."""


class ResourceError(RMFError):
    """A requested table or enumeration exceeds the configured memory budget."""


class RangeError(RMFError, ValueError):
    """An integer argument lies outside the range covered by a table."""


class PrecisionError(RMFError):
    """A truncation or tail bound exceeds the requested tolerance."""


class ModelError(RMFError):
    """A multiplicative function violates an assumption of the model."""


class SamplingError(RMFError):
    """A rejection sampler exceeded its iteration cap."""


class ConfigError(RMFError, ValueError):
    """An experiment configuration is malformed or fails validation."""
