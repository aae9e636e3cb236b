"""Pseudospectral laboratory for rigid-lid limits of shallow-water models."""

from .config import settings
from .models import AbcdParams, ModelKind, ModelSpec, State
from .norms import mixed_norm, morawetz_norm
from .phase import classify, kernel_decay_probe
from .ratelab import ExperimentSpec, fit_rate, run_sweep, theorem_suite
from .solver import InitialData, SolverConfig, Trajectory, run, run_euler2d, step
from .spectra import Grid, SpectralField

__version__ = settings.APP_VERSION

__all__ = [
    "AbcdParams",
    "ExperimentSpec",
    "Grid",
    "InitialData",
    "ModelKind",
    "ModelSpec",
    "SolverConfig",
    "SpectralField",
    "State",
    "Trajectory",
    "classify",
    "fit_rate",
    "kernel_decay_probe",
    "mixed_norm",
    "morawetz_norm",
    "run",
    "run_euler2d",
    "run_sweep",
    "step",
    "theorem_suite",
]
