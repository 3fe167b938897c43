"""Target-domain structural smoothing for unsupervised graph domain adaptation."""

from .errors import BundleFormatError, ConfigError, DataError, NumericError, ShapeError, TDSSError
from .graph import Graph, GraphBundle
from .kernels import backend_name

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "GraphBundle",
    "TDSSError",
    "ShapeError",
    "ConfigError",
    "DataError",
    "BundleFormatError",
    "NumericError",
    "backend_name",
    "__version__",
]
