# Data models and model systems

from .base import ArrayModel, BaseModel
from .spec import AbcdParams, ModelKind, ModelSpec
from .state import State
from .symbols import LinearPropagator, PhasePair, linear_symbol, propagate, semigroup_symbol
from .boussinesq import Nonlinearity, nonlinearity
from .green_naghdi import gn_Q_apply, gn_solve_momentum, gn_T_apply
from .euler import biot_savart, euler2d_rhs

__all__ = [
    "ArrayModel",
    "BaseModel",
    "AbcdParams",
    "ModelKind",
    "ModelSpec",
    "State",
    "LinearPropagator",
    "PhasePair",
    "linear_symbol",
    "propagate",
    "semigroup_symbol",
    "Nonlinearity",
    "nonlinearity",
    "gn_Q_apply",
    "gn_solve_momentum",
    "gn_T_apply",
    "biot_savart",
    "euler2d_rhs",
]
