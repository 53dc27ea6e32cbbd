"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class RoadLabelError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RoadLabelError):
    """Malformed or inconsistent configuration."""

    exit_code = 2


class DataIOError(RoadLabelError):
    """Unreadable input or unwritable output."""

    exit_code = 3


class ValidationError(RoadLabelError):
    """Input violates a documented precondition."""

    exit_code = 4


class DimensionMismatchError(ValidationError):
    """Two rasters that must share dimensions do not."""


class InvalidTransformError(ValidationError):
    """Transform parameters outside the valid domain (e.g. scale <= 0)."""


class RegistrationError(RoadLabelError):
    """Registration could not be computed at all."""

    exit_code = 5


class ZeroEnergyError(RegistrationError):
    """An input raster carries no spectral energy (e.g. all zeros)."""


class GraphError(RoadLabelError):
    """Transform-graph construction or search failure."""

    exit_code = 5
