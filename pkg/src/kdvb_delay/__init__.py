"""Simulation and decay certification for the delayed KdV-Burgers equation."""

__version__ = "0.1.0"
