"""Atomistic/continuum coupling for a periodic chain with adaptive error control."""

__version__ = "0.1.0"
