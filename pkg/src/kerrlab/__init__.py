"""Numerical laboratory for trapping, Morawetz multipliers and wave decay on Kerr."""

from .geometry import KerrParams, horizons, metric_bl, metric_tildet, tortoise, mu_profile

__all__ = ["KerrParams", "horizons", "metric_bl", "metric_tildet", "tortoise", "mu_profile"]
__version__ = "0.1.0"
