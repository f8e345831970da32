"""Steering-angle regression with phase-encoded sine-wave output layers."""

__version__ = "0.1.0"
