"""Localized randomized smoothing with collective robustness certificates."""

__version__ = "0.1.0"
