"""Bayesian mean-square deviations and uncertainty bounds for joint measurements
of canonical variables on truncated Fock spaces."""

from . import analytic, bounds, channels, estimation, fock, msd
from ._kernels import BACKEND
from .bounds import BoundReport, BoundSpec, bound_channel, bound_eb, bound_joint, mib_bound
from .channels import ChoiState, KrausChannel, PhaseSpaceGrid, choi_state
from .estimation import Estimator, Povm, estimator_to_model, model_to_estimator, simultaneous_diagonalize
from .fock import FockSpace, TruncationError
from .msd import GainSpec, GaussianPrior, MeasurementModel, MsdResult, msd_choi, msd_monte_carlo, msd_quadrature, mse_pair

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoundReport", "BoundSpec", "ChoiState", "Estimator", "FockSpace", "GainSpec",
    "GaussianPrior", "KrausChannel", "MeasurementModel", "MsdResult", "PhaseSpaceGrid", "Povm",
    "TruncationError", "analytic", "bound_channel", "bound_eb", "bound_joint", "bounds", "channels",
    "choi_state", "estimation", "estimator_to_model", "fock", "mib_bound", "model_to_estimator", "msd",
    "msd_choi", "msd_monte_carlo", "msd_quadrature", "mse_pair", "simultaneous_diagonalize",
]
