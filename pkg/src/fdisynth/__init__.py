"""Fault detection and isolation filter synthesis for linear time-invariant systems."""

__version__ = "0.1.0"
