"""Tire-force control allocation for four-wheel independently driven and steered vehicles."""

__version__ = "0.1.0"
