"""Hierarchical capacitive + inertial gesture recognition for glove sensor streams."""

from gesturegate.errors import (
    ConfigError,
    DataError,
    FrameOrderError,
    GestureGateError,
    ModelError,
    ModelFormatError,
    ShapeError,
)

__version__ = "0.1.0"

CLASS_NAMES = ("Null", "Up", "Down", "Back", "Forward", "Land", "Stop", "Left", "Right")
N_CLASSES = len(CLASS_NAMES)
NULL = 0

__all__ = [
    "CLASS_NAMES",
    "N_CLASSES",
    "NULL",
    "ConfigError",
    "DataError",
    "FrameOrderError",
    "GestureGateError",
    "ModelError",
    "ModelFormatError",
    "ShapeError",
]
