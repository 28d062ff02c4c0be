"""Particle-ensemble toolkit for invariant, physical, mixing and attracting measures."""

__version__ = "0.1.0"
