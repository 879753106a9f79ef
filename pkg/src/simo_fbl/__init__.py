"""Finite-blocklength rate bounds for quasi-static SIMO Rician fading."""
from .bounds import (
    BoundKind,
    BoundPoint,
    InfeasibleError,
    achievability_csir,
    achievability_nocsi,
    converse_csirt,
    normal_approx_awgn,
    outage_capacity,
)
from .config import DEFAULT_NUMERICS, NumericsConfig
from .fading import PointMassGain, RicianSimoGain
from .specfun import AccuracyTarget, ConvergenceError, DomainError
from .stats import AngleMode, ChannelSpec, reference_channel, rician_channel

__all__ = [
    "AccuracyTarget", "AngleMode", "BoundKind", "BoundPoint", "ChannelSpec", "ConvergenceError",
    "DEFAULT_NUMERICS", "DomainError", "InfeasibleError", "NumericsConfig", "PointMassGain",
    "RicianSimoGain", "achievability_csir", "achievability_nocsi", "converse_csirt",
    "normal_approx_awgn", "outage_capacity", "reference_channel", "rician_channel",
]
