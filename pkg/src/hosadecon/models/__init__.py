"""Data model package for hosadecon"""

from .series import (
    Pulse,
    ReflectivitySeries,
    RfTrace,
    Series,
    normalize_pulse,
    remove_mean,
)

__all__ = [
    "Pulse",
    "ReflectivitySeries",
    "RfTrace",
    "Series",
    "normalize_pulse",
    "remove_mean",
]
