"""Numerical toolkit for oblique derivative problems in Lipschitz graph domains."""
__version__ = "0.1.0"
