"""Adaptive 2D finite elements for the Oseen equations in
vorticity / Bernoulli-pressure form."""

__version__ = "0.1.0"
