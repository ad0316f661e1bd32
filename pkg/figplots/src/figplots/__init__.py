"""Figure rendering for the AMM fee study's exported CSV data."""

from .render import (FigureDataError, FigureSpec, KNOWN_FIGURES, build_figure,
                     line_series, render)

__all__ = ["FigureDataError", "FigureSpec", "KNOWN_FIGURES", "build_figure",
           "line_series", "render"]

__version__ = "0.1.0"
