"""Figure rendering for pclda metrics exports (CSV/JSON file interface)."""

from .render import PlotSpec, render
from .schema import SchemaError, read_metrics

__version__ = "0.1.0"

__all__ = ["PlotSpec", "render", "SchemaError", "read_metrics", "__version__"]
