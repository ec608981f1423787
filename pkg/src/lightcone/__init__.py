"""Pseudo-relativistic Schroedinger simulator and light-cone bound checks."""

__version__ = "0.1.0"
