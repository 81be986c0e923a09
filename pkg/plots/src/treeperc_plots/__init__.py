"""Offline figure scripts for treeperc artifacts.

These scripts are read-only consumers of the documented CSV/JSON schemas;
no number computed here feeds back into any computation.
"""

__version__ = "0.1.0"

from .schema import SchemaError, read_csv_columns
from .diagram import DiagramFigureSpec, build_diagram_figure, render_diagram
from .decay import build_decay_figure, render_decay
