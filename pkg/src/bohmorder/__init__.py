"""Bohmian trajectories, order and chaos, and quantum relaxation for analytic wavefunctions."""

__version__ = "0.1.0"

from .errors import BohmError
from .models import (WavefunctionModel, eval_field, harmonic3, harmonic4quartic, harmonic5,
                     load_model, make_model, nodal_point, wispuj)

__all__ = [
    "BohmError",
    "WavefunctionModel",
    "eval_field",
    "harmonic3",
    "harmonic4quartic",
    "harmonic5",
    "load_model",
    "make_model",
    "nodal_point",
    "wispuj",
]
