"""Planar pursuer/evader/defender engagement simulator with cooperative fixed-time guidance."""

__version__ = "0.1.0"
