"""Numerical lab for a concrete geometric Lorenz model and its invariant measures."""

from .errors import (DepthCapError, DomainError, EmptyFamilyError, InadmissibleWordError,
                     InputError, LorenzLabError, MathCheckFailure, NoPeriodicPointError)
from .params import DEFAULT_PARAMS, ModelParams, params_hash

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS", "ModelParams", "params_hash",
    "LorenzLabError", "InputError", "DomainError", "InadmissibleWordError",
    "NoPeriodicPointError", "DepthCapError", "EmptyFamilyError", "MathCheckFailure",
]
