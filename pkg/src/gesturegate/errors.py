"""Exception hierarchy shared across the pipeline."""


class GestureGateError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(GestureGateError, ValueError):
    pass


class DataError(GestureGateError, ValueError):
    """Malformed sensor data, session files or label streams."""


class FrameOrderError(DataError):
    """A frame arrived with a timestamp not after the previous one."""


class ShapeError(GestureGateError, ValueError):
    pass


class ModelError(GestureGateError):
    """Problems with model specs, weights or model files."""


class ModelFormatError(ModelError, ValueError):
    """Corrupt, truncated or version-mismatched model file."""
