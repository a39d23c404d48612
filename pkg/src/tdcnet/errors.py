"""Exception types shared across the package."""


class TdcnetError(Exception):
    """Base class for all tdcnet errors."""


class ConfigurationError(TdcnetError):
    """Unsupported or inconsistent configuration (bad scale, kernel < stride, ...)."""


class DimensionError(TdcnetError):
    """Tensor/layer shape mismatch."""


class WeightFormatError(TdcnetError):
    """Weight document violates the schema or declares inconsistent dimensions."""


class ScheduleMismatchError(TdcnetError):
    """A PE schedule was applied to a layer it was not built from."""


class InternalConsistencyError(TdcnetError):
    """Two redundant computations of the same quantity disagree (a bug, not bad input)."""
