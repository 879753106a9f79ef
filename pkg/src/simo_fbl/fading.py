"""Laws of the channel gain G = ||H||^2 over r receive branches."""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .rng import complex_normal
from .roots import solve_monotone
from .specfun import (
    DEFAULT_ACCURACY,
    AccuracyTarget,
    DomainError,
    _log_pois,
    noncentral_chisq_log_tails,
)

# probability levels used as panel edges when integrating over G
_TAIL_LEVELS = (1e-15, 1e-12, 1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 3e-3, 0.01, 0.03)


def quadrature_levels(n_body: int = 14) -> tuple[np.ndarray, np.ndarray]:
    """(lower-tail probabilities, upper-tail probabilities) for panel edges."""
    body = np.linspace(0.1, 0.9, max(n_body - 4, 2) + 1)
    lower = np.array(sorted(set(_TAIL_LEVELS) | set(body[body <= 0.5])))
    upper = np.array(sorted(set(_TAIL_LEVELS) | set(1.0 - body[body > 0.5])))
    return lower, upper


class GainDistribution(ABC):
    """Law of the nonnegative gain G; the bounds only ever touch it here."""

    num_rx: int
    is_point_mass = False

    @abstractmethod
    def pdf(self, g): ...

    @abstractmethod
    def logpdf(self, g): ...

    @abstractmethod
    def pdf_derivative(self, g): ...

    @abstractmethod
    def cdf(self, g): ...

    @abstractmethod
    def sf(self, g): ...

    @abstractmethod
    def sample_branches(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, r) complex branch gains H with ||H||^2 distributed as G."""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        h = self.sample_branches(rng, size)
        return np.sum(h.real ** 2 + h.imag ** 2, axis=1)

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def quantile(self, p: float) -> float:
        """Smallest g with cdf(g) >= p, by bracketed root finding."""
        if not (0.0 < p < 1.0):
            raise DomainError(f"p must lie in (0, 1), got {p!r}")
        if p > 0.5:
            return self.isf(1.0 - p)
        return self._invert(self.cdf, p, increasing=True)

    def isf(self, q: float) -> float:
        """g with sf(g) = q."""
        if not (0.0 < q < 1.0):
            raise DomainError(f"q must lie in (0, 1), got {q!r}")
        if q > 0.5:
            return self.quantile(1.0 - q)
        return self._invert(self.sf, q, increasing=False)

    def _invert(self, fn, target, increasing):
        m = self.mean
        # relative residual: tails go down to 1e-15
        lo, flo, hi, fhi, _ = solve_monotone(
            lambda g: math.log(max(fn(g), 1e-320)), math.log(target), 0.0, 2.0 * m,
            increasing=increasing, ftol=1e-13, xtol=1e-15, lower_limit=0.0)
        return lo if abs(flo - math.log(target)) <= abs(fhi - math.log(target)) else hi

    def quadrature_edges(self, n_body: int = 14) -> np.ndarray:
        """Increasing g values splitting the support into panels of similar mass."""
        return _cached_edges(self, n_body)


@lru_cache(maxsize=64)
def _cached_edges(dist: GainDistribution, n_body: int) -> np.ndarray:
    lower, upper = quadrature_levels(n_body)
    pts = [dist.quantile(p) for p in lower] + [dist.isf(q) for q in upper]
    out = np.unique(np.array(pts))
    out.setflags(write=False)
    return out


@njit(cache=True)
def _log_bessel_mixture(lam, y, m, edge_gap):
    """log sum_{j>=max(0,-m)} Pois(j; lam) Pois(m + j; y)."""
    j0 = max(0, -m)
    jstar = 0.5 * (-m + math.sqrt(m * m + 4.0 * lam * y))
    c = max(j0, int(jstar + 0.5))
    half = int(10.0 * math.sqrt(jstar + 1.0) + 30.0)
    while True:
        jl = max(j0, c - half)
        jh = c + half
        size = jh - jl + 1
        logt = np.empty(size)
        for idx in range(size):
            j = jl + idx
            logt[idx] = _log_pois(float(j), lam) + _log_pois(float(m + j), y)
        imax = 0
        mx = logt[0]
        for idx in range(1, size):
            if logt[idx] > mx:
                mx = logt[idx]
                imax = idx
        if mx == -np.inf:
            return -np.inf
        good = True
        if jl > j0 and (imax == 0 or logt[0] > mx - edge_gap):
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
def _rician_log_terms(g, theta, lam, r, edge_gap, out_a, out_b):
    # out_a: log sum w_j Pois(r+j-1; y), out_b: log sum w_j Pois(r+j-2; y)
    for i in range(g.shape[0]):
        y = g[i] / theta
        out_a[i] = _log_bessel_mixture(lam, y, r - 1, edge_gap)
        out_b[i] = _log_bessel_mixture(lam, y, r - 2, edge_gap)


def _as_array(g):
    arr = np.atleast_1d(np.asarray(g, dtype=float))
    return np.ascontiguousarray(arr.ravel()), np.shape(g)


@dataclass(frozen=True)
class RicianSimoGain(GainDistribution):
    """G = sum of r i.i.d. |H_i|^2, H_i ~ CN(sqrt(K P/(K+1)), P/(K+1)).

    ``k_factor`` is linear (not dB) and P = ``branch_power`` is the second
    moment of each branch. (2/theta) G is noncentral chi-square with 2r
    degrees of freedom and noncentrality 2rK, theta = P/(K+1).
    """

    k_factor: float
    num_rx: int = 1
    branch_power: float = 1.0
    accuracy: AccuracyTarget = DEFAULT_ACCURACY

    def __post_init__(self):
        if not (self.k_factor >= 0) or not math.isfinite(self.k_factor):
            raise DomainError("k_factor must be a finite nonnegative number")
        if int(self.num_rx) != self.num_rx or self.num_rx < 1:
            raise DomainError("num_rx must be a positive integer")
        if not (self.branch_power > 0):
            raise DomainError("branch_power must be positive")

    @property
    def theta(self) -> float:
        return self.branch_power / (self.k_factor + 1.0)

    @property
    def lam(self) -> float:
        return self.num_rx * self.k_factor

    @property
    def mean(self) -> float:
        return self.num_rx * self.branch_power

    def _log_terms(self, g):
        arr, shape = _as_array(g)
        a = np.empty_like(arr)
        b = np.empty_like(arr)
        _rician_log_terms(arr, self.theta, self.lam, int(self.num_rx),
                          self.accuracy.edge_gap, a, b)
        return arr, shape, a, b

    def logpdf(self, g):
        arr, shape, a, _ = self._log_terms(g)
        if np.any(arr < 0):
            raise DomainError("g must be nonnegative")
        out = a - math.log(self.theta)
        return float(out[0]) if shape == () else out.reshape(shape)

    def pdf(self, g):
        lp = self.logpdf(g)
        return math.exp(lp) if np.ndim(lp) == 0 else np.exp(lp)

    def pdf_derivative(self, g):
        """d f_G / dg; at g = 0 the right-hand limit."""
        arr, shape, a, b = self._log_terms(g)
        if np.any(arr < 0):
            raise DomainError("g must be nonnegative")
        out = (np.exp(b) - np.exp(a)) / self.theta ** 2
        return float(out[0]) if shape == () else out.reshape(shape)

    def _tails(self, g):
        arr = np.asarray(g, dtype=float)
        if np.any(arr < 0):
            raise DomainError("g must be nonnegative")
        return noncentral_chisq_log_tails(2.0 * arr / self.theta, 2 * int(self.num_rx),
                                          2.0 * self.lam, self.accuracy)

    def cdf(self, g):
        lo, _ = self._tails(g)
        return float(np.exp(lo)) if np.ndim(lo) == 0 else np.exp(lo)

    def sf(self, g):
        _, hi = self._tails(g)
        return float(np.exp(hi)) if np.ndim(hi) == 0 else np.exp(hi)

    def sample_branches(self, rng: np.random.Generator, size: int) -> np.ndarray:
        los = math.sqrt(self.k_factor * self.theta)
        return los + math.sqrt(self.theta) * complex_normal(rng, (size, int(self.num_rx)))


@dataclass(frozen=True)
class PointMassGain(GainDistribution):
    """Deterministic gain G = value (an AWGN channel with r branches)."""

    value: float = 1.0
    num_rx: int = 1
    is_point_mass = True

    def __post_init__(self):
        if not (self.value > 0) or not math.isfinite(self.value):
            raise DomainError("value must be positive and finite")

    @property
    def mean(self) -> float:
        return self.value

    def pdf(self, g):
        raise DomainError("a point mass has no density")

    logpdf = pdf
    pdf_derivative = pdf

    def cdf(self, g):
        return np.where(np.asarray(g) >= self.value, 1.0, 0.0) if np.ndim(g) else float(g >= self.value)

    def sf(self, g):
        return 1.0 - self.cdf(g)

    def quantile(self, p: float) -> float:
        if not (0.0 < p < 1.0):
            raise DomainError(f"p must lie in (0, 1), got {p!r}")
        return self.value

    def isf(self, q: float) -> float:
        return self.quantile(q)

    def sample_branches(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # isotropic direction, fixed norm
        d = complex_normal(rng, (size, int(self.num_rx)))
        return d * np.sqrt(self.value / np.sum(np.abs(d) ** 2, axis=1))[:, None]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.value)


def rician_simo_pdf(dist: RicianSimoGain, g: float) -> float:
    if g < 0:
        raise DomainError("g must be nonnegative")
    return dist.pdf(g)


def rician_simo_pdf_derivative(dist: RicianSimoGain, g: float) -> float:
    if not g > 0:
        raise DomainError("g must be positive")
    return dist.pdf_derivative(g)


def sample_gain(dist: GainDistribution, rng: np.random.Generator, size: int | None = None):
    """One gain sample (size None) or an array of them."""
    if size is None:
        return float(dist.sample(rng, 1)[0])
    return dist.sample(rng, size)
