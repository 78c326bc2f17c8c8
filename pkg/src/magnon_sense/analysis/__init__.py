"""Analytic models and estimators used alongside the master-equation simulation."""
from .allan import allan_deviation, loglog_slope
from .bell import bell_fidelity, dressed_basis, injected_level
from .dnp import DnpParams, differential_slope, dnp_model, fit_dnp
from .fitting import FitError, FitResult, fit_power_law, levenberg_marquardt
from .neff import fixed_point_residual, neff_curve, neff_solve
from .series import TimeSeries
from .sho import ShoParams, fit_sho, sho_analytic, sho_oracle, sho_response
from .smoothing import savgol, savgol_array

__all__ = [
    "DnpParams",
    "FitError",
    "FitResult",
    "ShoParams",
    "TimeSeries",
    "allan_deviation",
    "bell_fidelity",
    "differential_slope",
    "dnp_model",
    "dressed_basis",
    "fit_dnp",
    "fit_power_law",
    "fit_sho",
    "fixed_point_residual",
    "injected_level",
    "levenberg_marquardt",
    "loglog_slope",
    "neff_curve",
    "neff_solve",
    "savgol",
    "savgol_array",
    "sho_analytic",
    "sho_oracle",
    "sho_response",
]
