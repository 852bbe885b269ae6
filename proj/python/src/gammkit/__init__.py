"""Gaussian additive mixed models with AR(1) errors."""

from ._core import (
    DataError,
    Dataset,
    FitError,
    Model,
    acf,
    fit,
    parse_formula,
    read_csv,
    rho_sweep,
    run_cli,
    simulate,
    suggest_rho,
)

__all__ = [
    "DataError",
    "Dataset",
    "FitError",
    "Model",
    "acf",
    "fit",
    "parse_formula",
    "read_csv",
    "rho_sweep",
    "run_cli",
    "simulate",
    "suggest_rho",
]
