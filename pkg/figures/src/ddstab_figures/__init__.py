"""Rendering of ddstab CSV artifacts into figures.

Strictly presentation: the package parses the schema-tagged CSV files
written by the ddstab CLI and draws them; it performs no numerical work
beyond reading the tables.
"""

from ddstab_figures.render import FigureSpec, SchemaMismatch, render, render_all

__version__ = "0.1.0"
