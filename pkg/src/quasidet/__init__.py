"""Weak values, transient density operators and the zero-average conditional uncertainty identity."""

__all__ = ["__version__"]

__version__ = "0.1.0"
