"""Quasi-periodic split-step quantum walk as an extended CMV operator."""
from .model import GOLDEN, ParameterError, WalkParameters, generate_coefficients
from .gecmv import StateVector, walk_operator, cmv_window_operator
from .cocycle import CocycleMapSpec
from .lyapunov import classify_regime, closed_form_le, estimate_le, acceleration_at, predicted_regime

__all__ = [
    "GOLDEN", "ParameterError", "WalkParameters", "generate_coefficients", "StateVector",
    "walk_operator", "cmv_window_operator", "CocycleMapSpec", "classify_regime", "closed_form_le",
    "estimate_le", "acceleration_at", "predicted_regime",
]
