"""Adaptive Gauss-Kronrod (7/15) integration over a panel partition."""
from __future__ import annotations

import math

import numpy as np

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

# full 15-point node set on [-1, 1] and the matching weights
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
for _i, _k in enumerate((1, 3, 5)):
    GAUSS_W[_k] = GAUSS_W[14 - _k] = _WG[_i]
GAUSS_W[7] = _WG[3]


class QuadratureError(ArithmeticError):
    """Adaptive refinement ran out of rounds or panels."""


def _logsumexp_rows(v: np.ndarray) -> np.ndarray:
    m = np.max(v, axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(v - safe[:, None]), axis=1))


def integrate(fn, edges, *, tol: float = 1e-12, log_domain: bool = False,
              max_rounds: int = 40, max_panels: int = 20000):
    """Integrate ``fn`` over [edges[0], edges[-1]].

    ``fn`` maps a 1-d array of points to integrand values (or their logs when
    ``log_domain``). The partition starts at ``edges``; panels whose Kronrod
    and Gauss estimates disagree are bisected until the summed disagreement
    is below ``tol`` (absolute, or relative to the total in log domain).
    Returns (value, info) where value is the integral or its log.
    """
    e = np.unique(np.asarray(edges, dtype=float))
    a, b = e[:-1], e[1:]
    vals = np.empty(0)
    errs = np.empty(0)
    lo_k = np.empty(0)
    lo_g = np.empty(0)
    pa = np.empty(0)
    pb = np.empty(0)
    new_a, new_b = a, b
    evals = 0
    for rnd in range(max_rounds):
        half = 0.5 * (new_b - new_a)
        mid = 0.5 * (new_b + new_a)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        v = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
        evals += v.size
        if log_domain:
            with np.errstate(divide="ignore"):
                lh = np.log(half)[:, None]
                k = _logsumexp_rows(v + np.log(KRONROD_W)[None, :] + lh)
                gw = np.where(GAUSS_W > 0, np.log(np.where(GAUSS_W > 0, GAUSS_W, 1.0)), -np.inf)
                g = _logsumexp_rows(v + gw[None, :] + lh)
            lo_k = np.concatenate([lo_k, k])
            lo_g = np.concatenate([lo_g, g])
            total = np.logaddexp.reduce(lo_k) if lo_k.size else -np.inf
            if not np.isfinite(total):
                errs = np.zeros(lo_k.size)
            else:
                with np.errstate(invalid="ignore"):
                    errs = np.abs(np.exp(lo_k - total) - np.exp(lo_g - total))
                errs = np.nan_to_num(errs)
        else:
            k = half * (v @ KRONROD_W)
            g = half * (v @ GAUSS_W)
            vals = np.concatenate([vals, k])
            errs = np.concatenate([errs, np.abs(k - g)])
        pa = np.concatenate([pa, new_a])
        pb = np.concatenate([pb, new_b])
        err_total = float(np.sum(errs))
        if err_total <= tol:
            break
        if pa.size > max_panels:
            raise QuadratureError(f"panel budget exhausted, error estimate {err_total:.3g}")
        pick = errs > tol / (2.0 * errs.size)
        if not np.any(pick):
            pick = errs == errs.max()
        keep = ~pick
        sa, sb = pa[pick], pb[pick]
        sm = 0.5 * (sa + sb)
        new_a = np.concatenate([sa, sm])
        new_b = np.concatenate([sm, sb])
        pa, pb = pa[keep], pb[keep]
        if log_domain:
            lo_k, lo_g = lo_k[keep], lo_g[keep]
        else:
            vals, errs = vals[keep], errs[keep]
    else:
        raise QuadratureError(f"no convergence after {max_rounds} rounds, "
                              f"error estimate {err_total:.3g}")
    if log_domain:
        value = float(np.logaddexp.reduce(lo_k)) if lo_k.size else -math.inf
    else:
        value = float(np.sum(vals))
    return value, {"panels": int(pa.size), "evaluations": evals, "error": err_total,
                   "rounds": rnd + 1}
