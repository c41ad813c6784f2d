"""Diffusive energy balance model lab: equilibria, dynamics and stability."""

__version__ = "0.1.0"
