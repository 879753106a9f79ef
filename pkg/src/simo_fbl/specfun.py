"""Special-function kernels: Poisson/gamma tails, noncentral chi-square,
regularized incomplete Beta, and the Gaussian Q function.

The noncentral chi-square routines only support even degrees of freedom,
which is all the fading statistics ever need. Hot loops are compiled with
numba; everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(ArithmeticError):
    """Series, continued fraction or iteration hit its term cap."""


@dataclass(frozen=True)
class AccuracyTarget:
    """Absolute accuracy goal and series/iteration cap for the kernels."""

    abs_tol: float = 1e-12
    max_terms: int = 1_000_000

    def __post_init__(self):
        if not (self.abs_tol >= 1e-14) or not math.isfinite(self.abs_tol):
            raise DomainError(f"abs_tol must be >= 1e-14, got {self.abs_tol!r}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms!r}")

    @property
    def edge_gap(self) -> float:
        # log-ratio below the peak at which mixture terms are dropped
        return max(45.0, -math.log(self.abs_tol) + 12.0)


DEFAULT_ACCURACY = AccuracyTarget()

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
_FPMIN = 1e-300

# above this noncentrality (and 8x the dof) the Poisson mixture gets long;
# switch to the one-dimensional Gaussian-rotation integral
_LARGE_NC = 4.0e5

# ---------------------------------------------------------------------------
# compiled scalar kernels


@njit(cache=True)
def _stirlerr(x):
    # log(x!) - [(x + 1/2) log x - x + log sqrt(2 pi)]
    if x <= 15.0:
        return math.lgamma(x + 1.0) - (x + 0.5) * math.log(x) + x - 0.9189385332046728
    nn = x * x
    s0 = 1.0 / 12.0
    s1 = 1.0 / 360.0
    s2 = 1.0 / 1260.0
    s3 = 1.0 / 1680.0
    s4 = 1.0 / 1188.0
    if x > 500.0:
        return (s0 - s1 / nn) / x
    if x > 80.0:
        return (s0 - (s1 - s2 / nn) / nn) / x
    if x > 35.0:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / x
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / x


@njit(cache=True)
def _bd0(x, m):
    # x log(x/m) + m - x without cancellation
    if abs(x - m) < 0.1 * (x + m):
        v = (x - m) / (x + m)
        s = (x - m) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
        return s
    return x * math.log(x / m) + m - x


@njit(cache=True)
def _log_pois(x, lam):
    """log(lam^x e^-lam / Gamma(x+1)) for real x >= 0 (Loader's form)."""
    if x < 0.0:
        return -np.inf
    if lam == 0.0:
        return 0.0 if x == 0.0 else -np.inf
    if x == 0.0:
        return -lam
    return -_stirlerr(x) - _bd0(x, lam) - 0.5 * math.log(2.0 * math.pi * x)


@njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def _log1mexp(t):
    # log(1 - e^t) for t <= 0
    if t > -0.6931471805599453:
        return math.log(-math.expm1(t))
    return math.log1p(-math.exp(t))


@njit(cache=True)
def _log_gamma_pq(a, y, max_terms):
    """(log P(a, y), log Q(a, y), ok) for the regularized incomplete gamma."""
    if y <= 0.0:
        return -np.inf, 0.0, True
    lp = _log_pois(a, y)
    if y < a + 1.0:
        s = 1.0
        term = 1.0
        k = 0
        ok = False
        while k < max_terms:
            k += 1
            term *= y / (a + k)
            s += term
            if term < s * 1e-17:
                ok = True
                break
        logp = lp + math.log(s)
        return logp, _log1mexp(min(logp, 0.0)), ok
    b = y + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    ok = False
    for i in range(1, max_terms + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < 1e-16:
            ok = True
            break
    logq = math.log(a) + lp + math.log(h)
    return _log1mexp(min(logq, 0.0)), logq, ok


@njit(cache=True)
def _mixture_log_tail(y, n, lam, lower, edge_gap, max_terms):
    """log sum_j Pois(j; lam) T(n + j, y), T = P (lower) or Q (upper).

    With X ~ ncchi2(2n, 2 lam) and x = 2y this is log P[X <= x] (lower)
    or log P[X > x] (upper). Terms are log-concave in j; the window starts
    at the approximate peak and grows until both edges are negligible.
    Returns nan when the window would exceed max_terms.
    """
    jstar = 0.5 * (-n + math.sqrt(n * n + 4.0 * lam * y))
    c = int(jstar + 0.5)
    var = jstar * (n + jstar) / (n + 2.0 * jstar + 1e-300) + 1.0
    half = int(10.0 * math.sqrt(var) + 30.0)
    while True:
        jl = max(0, c - half)
        jh = c + half
        size = jh - jl + 1
        if size > max_terms:
            return np.nan
        logt = np.empty(size)
        if lower:
            logp, _, ok = _log_gamma_pq(n + jh, y, max_terms)
            if not ok:
                return np.nan
            for idx in range(size - 1, -1, -1):
                j = jl + idx
                if idx < size - 1:
                    logp = _logaddexp(logp, _log_pois(float(n + j), y))
                logt[idx] = _log_pois(float(j), lam) + logp
        else:
            _, logq, ok = _log_gamma_pq(n + jl, y, max_terms)
            if not ok:
                return np.nan
            for idx in range(size):
                j = jl + idx
                if idx > 0:
                    logq = _logaddexp(logq, _log_pois(float(n + j - 1), y))
                logt[idx] = _log_pois(float(j), lam) + logq
        imax = 0
        mx = logt[0]
        for idx in range(1, size):
            if logt[idx] > mx:
                mx = logt[idx]
                imax = idx
        if mx == -np.inf:
            return -np.inf
        good = True
        if jl > 0 and (imax == 0 or logt[0] > mx - edge_gap):
            good = False
        if imax == size - 1 or logt[size - 1] > mx - edge_gap:
            good = False
        if good:
            s = 0.0
            for idx in range(size):
                s += math.exp(logt[idx] - mx)
            return mx + math.log(s)
        c = jl + imax
        half *= 2


@njit(cache=True)
def _q(x):
    return 0.5 * math.erfc(x / 1.4142135623730951)


@njit(cache=True)
def _chi_pdf(w, k):
    # W^2/2 ~ Gamma(k/2): f(w) = w * Gamma density, written as a Poisson pmf
    if k == 1.0:
        return 0.7978845608028654 * math.exp(-0.5 * w * w)
    if w <= 0.0:
        return 0.0
    return w * math.exp(_log_pois(0.5 * k - 1.0, 0.5 * w * w))


@njit(cache=True)
def _large_nc_tails(x, dof, nc, gl_x, gl_w):
    """(cdf, sf) via X = (N + sqrt(nc))^2 + W^2 with W ~ chi(dof - 1)."""
    k = dof - 1.0
    sq = math.sqrt(nc)
    mode = math.sqrt(max(k - 1.0, 0.0))
    lo = max(0.0, mode - 12.0)
    hi = mode + 12.0
    sx = math.sqrt(x)
    cdf = 0.0
    sf = 0.0
    width = 0.75
    m = gl_x.shape[0]
    # part with W^2 <= x
    b1 = min(hi, sx)
    if b1 > lo:
        npan = int(math.ceil((b1 - lo) / width))
        h = (b1 - lo) / npan
        for p in range(npan):
            a0 = lo + p * h
            for i in range(m):
                w = a0 + 0.5 * h * (gl_x[i] + 1.0)
                wt = 0.5 * h * gl_w[i]
                dens = _chi_pdf(w, k)
                s = x - w * w
                r = math.sqrt(max(s, 0.0))
                a1 = (s - nc) / (r + sq)
                a2 = r + sq
                cdf += wt * dens * (_q(-a1) - _q(a2))
                sf += wt * dens * (_q(a1) + _q(a2))
    # mass with W^2 > x
    a_lo = max(lo, sx)
    if hi > a_lo:
        npan = int(math.ceil((hi - a_lo) / width))
        h = (hi - a_lo) / npan
        for p in range(npan):
            a0 = a_lo + p * h
            for i in range(m):
                w = a0 + 0.5 * h * (gl_x[i] + 1.0)
                wt = 0.5 * h * gl_w[i]
                sf += wt * _chi_pdf(w, k)
    return min(max(cdf, 0.0), 1.0), min(max(sf, 0.0), 1.0)


@njit(cache=True)
def _ncx2_log_tails(x, n, lam, edge_gap, max_terms, gl_x, gl_w, out_lo, out_hi):
    """Vectorized log CDF / log SF of ncchi2(2n, 2 lam[i]) at x[i].

    Returns False if a mixture window exceeded max_terms.
    """
    dof = 2.0 * n
    for i in range(x.shape[0]):
        xi = x[i]
        li = lam[i]
        if not xi > 0.0:
            out_lo[i] = -np.inf
            out_hi[i] = 0.0
            continue
        if xi == np.inf:
            out_lo[i] = 0.0
            out_hi[i] = -np.inf
            continue
        nc = 2.0 * li
        if nc > _LARGE_NC and nc > 8.0 * dof:
            c, s = _large_nc_tails(xi, dof, nc, gl_x, gl_w)
            out_lo[i] = math.log(c) if c > 0.0 else -np.inf
            out_hi[i] = math.log(s) if s > 0.0 else -np.inf
            continue
        lower = xi < dof + nc
        t = _mixture_log_tail(0.5 * xi, n, li, lower, edge_gap, max_terms)
        if t != t:
            return False
        t = min(t, 0.0)
        if lower:
            out_lo[i] = t
            out_hi[i] = _log1mexp(t)
        else:
            out_hi[i] = t
            out_lo[i] = _log1mexp(t)
    return True


@njit(cache=True)
def _log_pois_vec(k, lam):
    out = np.empty(k.shape[0])
    for i in range(k.shape[0]):
        out[i] = _log_pois(k[i], lam[i])
    return out


# ---------------------------------------------------------------------------
# Python-facing API

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _check_acc(acc):
    if not isinstance(acc, AccuracyTarget):
        raise DomainError("acc must be an AccuracyTarget")


def log_poisson_pmf(k, lam):
    """log of the Poisson(lam) pmf at k (k may be real, array-like)."""
    k = np.asarray(k, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(k < 0) or np.any(lam < 0):
        raise DomainError("k and lam must be nonnegative")
    kb, lb = np.broadcast_arrays(k, lam)
    out = _log_pois_vec(np.ascontiguousarray(kb).ravel(), np.ascontiguousarray(lb).ravel())
    out = out.reshape(kb.shape)
    return float(out) if out.ndim == 0 else out


def log_regularized_gamma(a: float, x: float, acc: AccuracyTarget = DEFAULT_ACCURACY):
    """(log P(a, x), log Q(a, x)) for the regularized incomplete gamma."""
    _check_acc(acc)
    if not a > 0 or not x >= 0:
        raise DomainError("need a > 0 and x >= 0")
    lp, lq, ok = _log_gamma_pq(float(a), float(x), int(acc.max_terms))
    if not ok:
        raise ConvergenceError("incomplete gamma did not converge")
    return lp, lq


def regularized_gamma_p(a: float, x: float, acc: AccuracyTarget = DEFAULT_ACCURACY) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    return math.exp(log_regularized_gamma(a, x, acc)[0])


def central_chisq_cdf(x: float, dof: float, acc: AccuracyTarget = DEFAULT_ACCURACY) -> float:
    if x <= 0:
        return 0.0
    return regularized_gamma_p(0.5 * dof, 0.5 * x, acc)


def _validate_ncx2(x, dof, nc):
    if int(dof) != dof or dof < 2 or int(dof) % 2:
        raise DomainError(f"dof must be an even integer >= 2, got {dof!r}")
    if np.any(np.isnan(x)) or np.any(np.asarray(x) < 0):
        raise DomainError("x must be nonnegative")
    if np.any(np.isnan(nc)) or np.any(np.asarray(nc) < 0):
        raise DomainError("noncentrality must be nonnegative")


def noncentral_chisq_log_tails(x, dof: int, nc, acc: AccuracyTarget = DEFAULT_ACCURACY):
    """Elementwise (log CDF, log SF) of ncchi2(dof, nc) at x.

    Arrays broadcast. Beyond noncentrality 4e5 the values come from a
    linear-scale integral and may be -inf where the linear value underflows.
    """
    _check_acc(acc)
    x = np.asarray(x, dtype=float)
    nc = np.asarray(nc, dtype=float)
    _validate_ncx2(x, dof, nc)
    xb, nb = np.broadcast_arrays(x, nc)
    shape = xb.shape
    xf = np.ascontiguousarray(xb, dtype=float).ravel()
    lf = 0.5 * np.ascontiguousarray(nb, dtype=float).ravel()
    lo = np.empty_like(xf)
    hi = np.empty_like(xf)
    ok = _ncx2_log_tails(xf, int(dof) // 2, lf, acc.edge_gap, int(acc.max_terms),
                         _GL_X, _GL_W, lo, hi)
    if not ok:
        raise ConvergenceError("noncentral chi-square mixture exceeded max_terms")
    return lo.reshape(shape), hi.reshape(shape)


def _scalar_or_array(v):
    return float(v) if np.ndim(v) == 0 else v


def noncentral_chisq_cdf(x, dof: int, nc, acc: AccuracyTarget = DEFAULT_ACCURACY):
    """P[X <= x] for X ~ noncentral chi-square(dof, nc), dof even."""
    lo, _ = noncentral_chisq_log_tails(x, dof, nc, acc)
    return _scalar_or_array(np.exp(lo))


def noncentral_chisq_sf(x, dof: int, nc, acc: AccuracyTarget = DEFAULT_ACCURACY):
    _, hi = noncentral_chisq_log_tails(x, dof, nc, acc)
    return _scalar_or_array(np.exp(hi))


def noncentral_chisq_logcdf(x, dof: int, nc, acc: AccuracyTarget = DEFAULT_ACCURACY):
    return _scalar_or_array(noncentral_chisq_log_tails(x, dof, nc, acc)[0])


def noncentral_chisq_logsf(x, dof: int, nc, acc: AccuracyTarget = DEFAULT_ACCURACY):
    return _scalar_or_array(noncentral_chisq_log_tails(x, dof, nc, acc)[1])


# ---------------------------------------------------------------------------
# incomplete Beta


def _log_beta_fn(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(x, a, b, max_terms):
    # modified Lentz evaluation of the incomplete Beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, max_terms + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < 1e-16:
            return h
    raise ConvergenceError("incomplete Beta continued fraction did not converge")


def _log_ibeta_direct(x, a, b, max_terms):
    front = a * math.log(x) + b * math.log1p(-x) - _log_beta_fn(a, b) - math.log(a)
    return front + math.log(_betacf(x, a, b, max_terms))


def log_regularized_incomplete_beta(x: float, a: float, b: float,
                                    acc: AccuracyTarget = DEFAULT_ACCURACY) -> float:
    """log I_x(a, b); stays finite when the CDF itself underflows."""
    _check_acc(acc)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if not (a > 0 and b > 0):
        raise DomainError("a and b must be positive")
    if x == 0.0:
        return -math.inf
    if x == 1.0:
        return 0.0
    if x < a / (a + b):
        return _log_ibeta_direct(x, a, b, int(acc.max_terms))
    comp = _log_ibeta_direct(1.0 - x, b, a, int(acc.max_terms))
    return float(_log1mexp(min(comp, 0.0)))


def regularized_incomplete_beta(x: float, a: float, b: float,
                                acc: AccuracyTarget = DEFAULT_ACCURACY) -> float:
    """Beta(a, b) CDF at x."""
    return math.exp(log_regularized_incomplete_beta(x, a, b, acc))


# ---------------------------------------------------------------------------
# Gaussian Q


def gaussian_q(x: float) -> float:
    """Upper tail of the standard normal."""
    return 0.5 * math.erfc(x / _SQRT2)


def log_gaussian_q(x: float) -> float:
    if x < 35.0:
        return math.log(0.5 * math.erfc(x / _SQRT2))
    z = 1.0 / (x * x)
    series = 1.0 - z * (1.0 - z * (3.0 - z * (15.0 - 105.0 * z)))
    return -0.5 * x * x - math.log(x) - _LN_SQRT_2PI + math.log(series)


def gaussian_q_inv(p: float) -> float:
    """Inverse of gaussian_q on (0, 1)."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    if p > 0.5:
        return -gaussian_q_inv(1.0 - p)
    if p == 0.5:
        return 0.0
    # Abramowitz-Stegun 26.2.23 start, then Newton on log Q
    t = math.sqrt(-2.0 * math.log(p))
    x = t - (2.515517 + t * (0.802853 + t * 0.010328)) / (
        1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)))
    logp = math.log(p)
    for _ in range(50):
        lq = log_gaussian_q(x)
        # d/dx log Q = -phi(x)/Q(x)
        slope = -math.exp(-0.5 * x * x - _LN_SQRT_2PI - lq)
        step = (lq - logp) / slope
        x -= step
        if abs(step) < 1e-15 * (1.0 + abs(x)):
            break
    return x
