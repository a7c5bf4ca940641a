"""Sliding-mode control toolkit for discontinuous integro-differential equations."""

__version__ = '0.1.0'
