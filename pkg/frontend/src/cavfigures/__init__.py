"""Figure-style panels rendered from simulation CSV artifacts.

This package does no physics: every curve it draws — simulated data and
analytic predictions alike — comes from columns of the CSV files the
simulation CLI emitted, so there is a single source of numerical truth.
"""

from .render import PanelError, PanelSpec, parse_spec, render

__all__ = ["PanelError", "PanelSpec", "parse_spec", "render"]

__version__ = "0.1.0"
