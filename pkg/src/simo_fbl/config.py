"""Numerical settings shared by the bound computations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .specfun import DEFAULT_ACCURACY, AccuracyTarget, DomainError


@dataclass(frozen=True)
class NumericsConfig:
    """Quadrature, root-finding and Monte Carlo settings.

    ``quad_nodes`` sizes the starting partition of the gain axis: about
    quad_nodes / 15 equal-probability panels in the body of the law, plus
    tail panels and panels clustered around the statistic's transition.
    """

    quad_nodes: int = 201
    quad_tol: float = 1e-12
    log_quad_rtol: float = 1e-10
    root_tol: float = 1e-9
    max_iter: int = 200
    mc_samples: int = 100_000
    seed: int = 20140101
    accuracy: AccuracyTarget = field(default=DEFAULT_ACCURACY)

    def __post_init__(self):
        if self.quad_nodes < 15:
            raise DomainError("quad_nodes must be at least 15")
        for name in ("quad_tol", "log_quad_rtol", "root_tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive, got {v!r}")
        if self.max_iter < 1 or self.mc_samples < 1:
            raise DomainError("max_iter and mc_samples must be positive")

    @property
    def body_panels(self) -> int:
        return max(4, math.ceil(self.quad_nodes / 15))


DEFAULT_NUMERICS = NumericsConfig()
