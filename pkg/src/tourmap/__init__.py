"""Spatial characterisation of tourist activity from geotagged social media."""

from ._backend import BACKEND
from .errors import ConfigError, DataError, NumericError, TourmapError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DataError",
    "NumericError",
    "TourmapError",
    "__version__",
]
