"""Compression of strings drawn from samplable sources."""

__version__ = "0.1.0"
