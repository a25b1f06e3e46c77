"""Polynomial kernel regression on fundamental systems of centers."""

__version__ = "0.1.0"

from epkr.centers import CenterSet, build_fundamental_system, poly_dim
from epkr.data import Dataset, gen_toy, gen_toy_test, load_csv, normalize_ball, rmse, split
from epkr.errors import (
    CenterVerificationError,
    ConfigError,
    ConvergenceError,
    DataError,
    EpkrError,
    NumericalError,
)
from epkr.estimators import Model, classify_plugin, fit_cbr_epkr, fit_epkr, fit_gkr, fit_pkr, predict
from epkr.kernel import GaussKernel, PolyKernel, clip, kernel_matrix
from epkr.selection import SelectionGrid, holdout_select, kfold_cv

__all__ = [
    "CenterSet",
    "CenterVerificationError",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "EpkrError",
    "GaussKernel",
    "Model",
    "NumericalError",
    "PolyKernel",
    "SelectionGrid",
    "build_fundamental_system",
    "classify_plugin",
    "clip",
    "fit_cbr_epkr",
    "fit_epkr",
    "fit_gkr",
    "fit_pkr",
    "gen_toy",
    "gen_toy_test",
    "holdout_select",
    "kernel_matrix",
    "kfold_cv",
    "load_csv",
    "normalize_ball",
    "poly_dim",
    "predict",
    "rmse",
    "split",
]
