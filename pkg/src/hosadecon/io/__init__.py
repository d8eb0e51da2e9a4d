"""File formats for hosadecon"""

from .trace_io import (
    load_manifest,
    load_pulse,
    load_reflectivity,
    load_trace,
    save_series,
)

__all__ = [
    "load_manifest",
    "load_pulse",
    "load_reflectivity",
    "load_trace",
    "save_series",
]
