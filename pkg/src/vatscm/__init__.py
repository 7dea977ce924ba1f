"""Synthetic control estimates of VAT pass-through on consumer prices."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, CoverageError, DataError, VatScmError
from .panel import MonthKey, Panel, PriceSeries, StudyDesign, validate_panel
from .passthrough import TaxChange, full_passthrough_series, passthrough_rate, treatment_effect
from .scm import ScmFit, SolverOptions, WeightVector, fit_weights, project_to_simplex, rmspe, synthetic_value

__all__ = [
    "ConfigError", "ConvergenceError", "CoverageError", "DataError", "VatScmError",
    "MonthKey", "Panel", "PriceSeries", "StudyDesign", "validate_panel",
    "TaxChange", "full_passthrough_series", "passthrough_rate", "treatment_effect",
    "ScmFit", "SolverOptions", "WeightVector", "fit_weights", "project_to_simplex", "rmspe", "synthetic_value",
]
