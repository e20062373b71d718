"""Potential theory, exit laws and quasi-stationary distributions of
continuous-time chains that move down one step at a time and may jump up
arbitrarily, with optional killing."""

from .errors import HypothesisError, ModelError, NumericalError, SkipFreeError
from .exitlaws import (
    ExitQuery,
    downcross_laplace,
    green_absorbed,
    hit_laplace_limit,
    occupation_transform,
    resolvent_green,
    upcross_laplace,
)
from .model import SingleDeathModel, TruncationWindow, killing_regime, validate_model
from .potential import g_coefficients, harmonic_h, potential_table, w, w_series, z, z_infinity
from .presets import preset
from .qsd import (
    classify,
    classify_regime,
    decay_parameter,
    doob_g_closed_form,
    doob_transform,
    qsd_candidate,
    stationarity_residual,
)
from .rates import Constant, ExplicitUp, Geometric, GeometricUp, Jumps, NoUp, Power, Sites, Table

__all__ = [
    "Constant", "ExitQuery", "ExplicitUp", "Geometric", "GeometricUp", "HypothesisError", "Jumps", "ModelError",
    "NoUp", "NumericalError", "Power", "SingleDeathModel", "Sites", "SkipFreeError", "Table", "TruncationWindow",
    "classify", "classify_regime", "decay_parameter", "doob_g_closed_form", "doob_transform", "downcross_laplace",
    "g_coefficients", "green_absorbed", "harmonic_h", "hit_laplace_limit", "killing_regime", "occupation_transform",
    "potential_table", "preset", "qsd_candidate", "resolvent_green", "stationarity_residual", "upcross_laplace",
    "validate_model", "w", "w_series", "z", "z_infinity",
]
