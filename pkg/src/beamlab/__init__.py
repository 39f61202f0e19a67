"""Reflection of internal-wave beams off a near-critical slope: roots, fields, residuals and DNS."""

__version__ = "0.1.0"
