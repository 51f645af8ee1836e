"""Workbench for the SoS lower-bound machinery of non-Gaussian component analysis."""

__version__ = "0.1.0"
