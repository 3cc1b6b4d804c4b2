"""Numerical verification toolkit for neutral-signature anti-self-dual geometry."""

__version__ = "0.1.0"
