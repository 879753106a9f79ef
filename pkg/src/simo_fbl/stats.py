"""Distribution functions of the decision statistics S_n, L_n and the angle
statistic, averaged over the fading gain.

Given G = g every statistic reduces to a noncentral chi-square with 2n
degrees of freedom:

* S_n (under the true channel): P[S_n <= n gamma | g] = P[X >= t_S], with
  X ~ ncchi2(2n, 2n/(rho g)), t_S = (2/(rho g))(1 + rho g)(n log(1+rho g) + n - n gamma).
* L_n (under the auxiliary channel): P[L_n >= n gamma | g] = P[X <= t_L], with
  X ~ ncchi2(2n, 2n(1+rho g)/(rho g)), t_L = (2/(rho g))(n log(1+rho g) + n - n gamma).
* relaxed angle statistic: P[sum|Z|^2 / sum|Z + sqrt(g rho)|^2 <= gamma | g]
  = P[X <= 2 n gamma g rho/(1-gamma)^2], X ~ ncchi2(2n, 2n gamma^2 g rho/(1-gamma)^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import DEFAULT_NUMERICS, NumericsConfig
from .fading import GainDistribution, RicianSimoGain
from .quadrature import integrate
from .specfun import DomainError, noncentral_chisq_log_tails

__all__ = [
    "AngleMode", "ChannelSpec", "ConditionalStatistic", "StatisticKind", "capacity_outage_cdf",
    "cond_log_prob_L_ge", "cond_prob_S_le", "cond_prob_angle_relaxed", "db_to_linear",
    "log_prob_L_ge", "prob_L_ge", "prob_S_le", "prob_angle_ge", "reference_channel",
    "rician_channel",
]


@dataclass(frozen=True)
class ChannelSpec:
    """Linear SNR rho and the law of the gain (which fixes r)."""

    snr: float
    gain: GainDistribution

    def __post_init__(self):
        if not (self.snr > 0) or not math.isfinite(self.snr):
            raise DomainError("snr must be positive and finite")
        if not isinstance(self.gain, GainDistribution):
            raise DomainError("gain must be a GainDistribution")

    @property
    def num_rx(self) -> int:
        return int(self.gain.num_rx)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def rician_channel(snr_db: float, k_db: float, num_rx: int) -> ChannelSpec:
    """Rician SIMO channel with unit-power branches, SNR and K in dB."""
    return ChannelSpec(db_to_linear(snr_db), RicianSimoGain(db_to_linear(k_db), num_rx))


def reference_channel() -> ChannelSpec:
    """K = 20 dB, two receive antennas, SNR = -1.55 dB."""
    return rician_channel(-1.55, 20.0, 2)


class AngleMode(str, Enum):
    PROJECTION = "projection"
    MC_EXACT = "mc-exact"


class StatisticKind(str, Enum):
    S = "S"
    L = "L"
    ANGLE = "angle"


@dataclass(frozen=True)
class ConditionalStatistic:
    kind: StatisticKind
    blocklength: int
    threshold: float


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"blocklength must be a positive integer, got {n!r}")
    return int(n)


# ---------------------------------------------------------------------------
# conditional probabilities given G = g (vectorized)


def cond_prob_S_le(spec: ChannelSpec, n: int, gamma: float, g, cfg=DEFAULT_NUMERICS):
    g = np.atleast_1d(np.asarray(g, dtype=float))
    rg = spec.snr * g
    out = np.ones_like(g)
    pos = rg > 0
    rg = rg[pos]
    t = (2.0 / rg) * (1.0 + rg) * (n * np.log1p(rg) + n - n * gamma)
    nc = 2.0 * n / rg
    live = t > 0
    _, lsf = noncentral_chisq_log_tails(t[live], 2 * n, nc[live], cfg.accuracy)
    sub = np.ones_like(t)
    sub[live] = np.exp(lsf)
    out[pos] = sub
    return out


def cond_log_prob_L_ge(spec: ChannelSpec, n: int, gamma: float, g, cfg=DEFAULT_NUMERICS):
    g = np.atleast_1d(np.asarray(g, dtype=float))
    rg = spec.snr * g
    out = np.full_like(g, -np.inf)
    pos = rg > 0
    rg = rg[pos]
    t = (2.0 / rg) * (n * np.log1p(rg) + n - n * gamma)
    nc = 2.0 * n * (1.0 + rg) / rg
    live = t > 0
    lcdf, _ = noncentral_chisq_log_tails(t[live], 2 * n, nc[live], cfg.accuracy)
    sub = np.full_like(t, -np.inf)
    sub[live] = lcdf
    out[pos] = sub
    return out


def cond_prob_angle_relaxed(spec: ChannelSpec, n: int, gamma01: float, g, cfg=DEFAULT_NUMERICS):
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if gamma01 >= 1.0:
        return np.ones_like(g)
    if gamma01 <= 0.0:
        return np.zeros_like(g)
    scale = 2.0 * n * gamma01 * spec.snr * g / (1.0 - gamma01) ** 2
    lcdf, _ = noncentral_chisq_log_tails(scale, 2 * n, gamma01 * scale, cfg.accuracy)
    return np.exp(lcdf)


# ---------------------------------------------------------------------------
# expectations over G


def _sl_transition(spec, n, gamma):
    if gamma <= 0:
        return None
    g0 = math.expm1(gamma) / spec.snr
    rg = spec.snr * g0
    sigma = math.sqrt(rg * (rg + 2.0)) / (1.0 + rg)
    return g0, sigma * (1.0 + rg) / (spec.snr * math.sqrt(n))


def _angle_transition(spec, n, gamma01):
    g0 = (1.0 / gamma01 - 1.0) / spec.snr
    width = math.sqrt((1.0 - gamma01) ** 2 + 2.0 * gamma01 ** 2 * g0 * spec.snr) / (
        gamma01 * spec.snr * math.sqrt(n))
    return g0, width


_OFFSETS = np.array([0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0])


def _edges(spec: ChannelSpec, cfg: NumericsConfig, transition):
    base = np.asarray(spec.gain.quadrature_edges(cfg.body_panels))
    lo, hi = base[0], base[-1]
    pts = [base]
    if transition is not None:
        g0, w = transition
        extra = np.concatenate([g0 - w * _OFFSETS, g0 + w * _OFFSETS[1:]])
        pts.append(extra[(extra > lo) & (extra < hi)])
    return np.unique(np.concatenate(pts))


def _expect(spec: ChannelSpec, cond, cfg: NumericsConfig, transition):
    """E_G[cond(G)] for a linear-scale conditional probability."""
    gain = spec.gain
    if gain.is_point_mass:
        return float(cond(np.array([gain.value]))[0])
    edges = _edges(spec, cfg, transition)

    def integrand(g):
        return cond(g) * np.exp(gain.logpdf(g))

    body, _ = integrate(integrand, edges, tol=cfg.quad_tol)
    # mass beyond the outermost quantile edges, weighted by the endpoint value
    ends = cond(edges[[0, -1]])
    tails = gain.cdf(edges[0]) * ends[0] + gain.sf(edges[-1]) * ends[1]
    return float(min(max(body + tails, 0.0), 1.0))


def prob_S_le(spec: ChannelSpec, n: int, gamma: float, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """P[S_n <= n gamma] with gamma in nats per channel use."""
    n = _check_n(n)
    if gamma == math.inf:
        return 1.0
    if gamma == -math.inf:
        return 0.0
    return _expect(spec, lambda g: cond_prob_S_le(spec, n, gamma, g, cfg), cfg,
                   _sl_transition(spec, n, gamma))


def log_prob_L_ge(spec: ChannelSpec, n: int, gamma: float, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """log P[L_n >= n gamma] under the auxiliary channel; -inf on underflow."""
    n = _check_n(n)
    if gamma == -math.inf:
        return 0.0
    if gamma == math.inf:
        return -math.inf
    gain = spec.gain
    if gain.is_point_mass:
        return float(cond_log_prob_L_ge(spec, n, gamma, np.array([gain.value]), cfg)[0])
    edges = _edges(spec, cfg, _sl_transition(spec, n, gamma))

    def log_integrand(g):
        return cond_log_prob_L_ge(spec, n, gamma, g, cfg) + gain.logpdf(g)

    value, _ = integrate(log_integrand, edges, tol=cfg.log_quad_rtol, log_domain=True)
    return min(value, 0.0)


def prob_L_ge(spec: ChannelSpec, n: int, gamma: float, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    return math.exp(log_prob_L_ge(spec, n, gamma, cfg))


def prob_angle_ge(spec: ChannelSpec, n: int, gamma01: float, mode=AngleMode.PROJECTION,
                  cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """P[cos^2 theta(x0, Y) >= 1 - gamma01] for the all-equal codeword x0.

    ``projection`` returns the semi-analytic lower bound obtained by
    projecting Y onto conj(h) and dropping the in-codeword noise term;
    ``mc-exact`` estimates the exact probability by simulation.
    """
    n = _check_n(n)
    mode = AngleMode(mode)
    if n <= spec.num_rx:
        raise DomainError("the angle statistic needs n > r")
    if not (0.0 <= gamma01 <= 1.0):
        raise DomainError("gamma01 must lie in [0, 1]")
    if mode is AngleMode.MC_EXACT:
        if cfg.mc_samples < 10_000:
            raise DomainError("mc-exact mode needs at least 1e4 samples")
        from .oracle import McConfig, mc_prob_angle_ge
        est = mc_prob_angle_ge(spec, n, gamma01, McConfig(cfg.mc_samples, cfg.seed),
                               statistic="exact")
        return est.mean
    if gamma01 >= 1.0:
        return 1.0
    if gamma01 <= 0.0:
        return 0.0
    return _expect(spec, lambda g: cond_prob_angle_relaxed(spec, n, gamma01, g, cfg), cfg,
                   _angle_transition(spec, n, gamma01))


def capacity_outage_cdf(spec: ChannelSpec, xi: float) -> float:
    """F_C(xi) = P[log(1 + rho G) <= xi]."""
    if xi <= 0:
        return 0.0
    return float(spec.gain.cdf(math.expm1(xi) / spec.snr))
