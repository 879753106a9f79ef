"""Bracketed root finding for monotone functions."""
from __future__ import annotations

import math
from typing import Callable


class BracketError(ArithmeticError):
    """No sign change could be found for the requested target."""


def solve_monotone(fn: Callable[[float], float], target: float, lo: float, hi: float,
                   *, increasing: bool = True, ftol: float = 1e-9, xtol: float = 1e-13,
                   max_iter: int = 200, expand: float = 2.0, max_expand: int = 60,
                   lower_limit: float = -math.inf, upper_limit: float = math.inf):
    """Solve fn(x) = target for monotone fn.

    Uses the Illinois variant of regula falsi with a bisection fallback,
    widening [lo, hi] geometrically (clipped to the limits) until it brackets
    the target. Returns ``(x_lo, f_lo, x_hi, f_hi, iterations)`` where the
    true root lies between x_lo and x_hi and one of the ends meets ``ftol``.
    ``x_lo`` is the end with fn <= target for increasing fn, fn >= target
    for decreasing fn.
    """
    sign = 1.0 if increasing else -1.0

    def g(x):
        return sign * (fn(x) - target)

    glo, ghi = g(lo), g(hi)
    width = hi - lo
    k = 0
    while glo > 0 or ghi < 0:
        if k >= max_expand:
            raise BracketError(f"could not bracket target {target!r}")
        width *= expand
        if glo > 0:
            if lo <= lower_limit:
                raise BracketError(f"target {target!r} below the reachable range")
            hi, ghi = lo, glo
            lo = max(lo - width, lower_limit)
            glo = g(lo)
        else:
            if hi >= upper_limit:
                raise BracketError(f"target {target!r} above the reachable range")
            lo, glo = hi, ghi
            hi = min(hi + width, upper_limit)
            ghi = g(hi)
        k += 1

    it = 0
    side = 0
    alo, ahi = glo, ghi  # Illinois-weighted end values
    widths = [hi - lo]
    while it < max_iter:
        if min(abs(glo), abs(ghi)) <= ftol or hi - lo <= xtol * (1.0 + abs(lo)):
            break
        it += 1
        x = lo - alo * (hi - lo) / (ahi - alo)
        stalled = len(widths) >= 4 and (hi - lo) > 0.25 * widths[-4]
        if stalled or not (lo < x < hi):
            x = 0.5 * (lo + hi)
            side = 0
        gx = g(x)
        if gx <= 0:
            lo, glo, alo = x, gx, gx
            if side == -1:
                ahi *= 0.5
            side = -1
        else:
            hi, ghi, ahi = x, gx, gx
            if side == 1:
                alo *= 0.5
            side = 1
        widths.append(hi - lo)
    return lo, sign * glo + target, hi, sign * ghi + target, it
