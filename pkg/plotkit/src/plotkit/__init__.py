"""Deterministic figure rendering for simulator sweep CSVs."""

from .render import render, strip_metadata
from .spec import FigureSpec, SpecError, load_spec

__version__ = "0.1.0"

__all__ = ["FigureSpec", "SpecError", "load_spec", "render",
           "strip_metadata", "__version__"]
