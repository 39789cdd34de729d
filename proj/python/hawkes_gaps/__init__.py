"""Multivariate Hawkes processes observed through gaps."""

from ._core import (
    Events,
    IntensityError,
    NumericalError,
    Params,
    Windows,
    cif_full,
    count_histogram,
    fit,
    generate_windows,
    restrict_events,
    run_experiment,
    simulate,
)

__all__ = [
    "Events",
    "IntensityError",
    "NumericalError",
    "Params",
    "Windows",
    "cif_full",
    "count_histogram",
    "fit",
    "generate_windows",
    "restrict_events",
    "run_experiment",
    "simulate",
]
