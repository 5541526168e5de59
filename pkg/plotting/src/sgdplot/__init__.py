"""Three-panel SGD trajectory figure rendered from CSV exports."""

from sgdplot.figure import FigureSpec, SchemaError, render_figure

__all__ = ["FigureSpec", "SchemaError", "render_figure"]

__version__ = "0.1.0"
