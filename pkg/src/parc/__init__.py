"""Piecewise affine regression and classification (PARC)."""

from .core import FitReport, ParcConfig, ParcError, cv_score, fit, fit_arrays, select_k
from .data import ColumnSpec, DataError, EncodedDataset, load_table, split
from .model import ParcModel
from .predictor import evaluate, predict, region_of, regions

__version__ = "0.1.0"

__all__ = [
    "ColumnSpec", "DataError", "EncodedDataset", "FitReport", "ParcConfig", "ParcError",
    "ParcModel", "cv_score", "evaluate", "fit", "fit_arrays", "load_table", "predict",
    "region_of", "regions", "select_k", "split",
]
