"""Numerical laboratory for anisotropic Fourier multipliers unbounded on L^p."""

__version__ = "0.1.0"
