"""Interpretable longitudinal EHR risk prediction engine."""

__version__ = "0.1.0"
