"""Batch renderer for delimited experiment artifacts.

A plot specification (JSON) names an input CSV, a figure kind, and axis
styling; `render` turns it into a PNG without touching the input.  A
data-extraction mode re-emits exactly the CSV cells that would be plotted,
for golden-file comparison against the producing pipeline.
"""

from .spec import PlotSpec, SpecError, load_spec
from .render import extract, render

__all__ = ["PlotSpec", "SpecError", "load_spec", "render", "extract"]
