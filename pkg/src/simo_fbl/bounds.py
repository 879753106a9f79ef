"""Rate bounds for the quasi-static SIMO fading channel.

Internal math is in nats; every returned rate is in bits per channel use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import DEFAULT_NUMERICS, NumericsConfig
from .roots import BracketError, solve_monotone
from .specfun import DomainError, gaussian_q_inv, log_regularized_incomplete_beta
from .stats import AngleMode, ChannelSpec, log_prob_L_ge, prob_angle_ge, prob_S_le

LN2 = math.log(2.0)
# largest angle threshold the solver may use; beyond it the noncentrality explodes
GAMMA01_CAP = 1.0 - 1e-6


class InfeasibleError(ArithmeticError):
    """The requested bound has no valid operating point."""


class BoundKind(str, Enum):
    OUTAGE = "outage-capacity"
    CONVERSE = "converse-csirt"
    NOCSI = "achievability-nocsi"
    CSIR = "achievability-csir"
    AWGN = "normal-awgn"


@dataclass(frozen=True)
class GammaSolution:
    gamma: float
    target_prob: float
    achieved_prob: float
    iterations: int

    @property
    def residual(self) -> float:
        return abs(self.achieved_prob - self.target_prob)


@dataclass(frozen=True)
class BoundPoint:
    """One point of a rate curve; ``rate`` in bits per channel use."""

    blocklength: int
    rate: float
    kind: BoundKind
    gamma: float | None = None
    residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"


def _check_eps(epsilon):
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")


def outage_capacity_nats(spec: ChannelSpec, epsilon: float) -> float:
    """C_eps = log(1 + rho F_G^{-1}(eps)) in nats."""
    _check_eps(epsilon)
    g = spec.gain.quantile(epsilon)
    if not spec.gain.is_point_mass:
        # a flat CDF at eps would make C_eps ill-defined
        if not spec.gain.pdf(g) > 1e-300:
            raise DomainError("gain CDF is flat at epsilon; outage capacity is not unique")
    return math.log1p(spec.snr * g)


def outage_capacity(spec: ChannelSpec, epsilon: float, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """Outage capacity in bits per channel use."""
    return outage_capacity_nats(spec, epsilon) / LN2


def solve_gamma(fn, target: float, lo: float, hi: float, cfg: NumericsConfig,
                *, increasing: bool = True, lower_limit=-math.inf, upper_limit=math.inf):
    """Threshold with fn(gamma) = target for a monotone probability fn."""
    x_lo, f_lo, x_hi, f_hi, it = solve_monotone(
        fn, target, lo, hi, increasing=increasing, ftol=cfg.root_tol, max_iter=cfg.max_iter,
        lower_limit=lower_limit, upper_limit=upper_limit)
    if abs(f_lo - target) <= abs(f_hi - target):
        return GammaSolution(x_lo, target, f_lo, it)
    return GammaSolution(x_hi, target, f_hi, it)


def _sl_bracket(spec, n, epsilon):
    c = outage_capacity_nats(spec, epsilon)
    w = 5.0 / math.sqrt(n) + 1.0
    return c - w, c + w


def solve_converse_gamma(spec: ChannelSpec, n: int, target: float,
                         cfg: NumericsConfig = DEFAULT_NUMERICS) -> GammaSolution:
    """gamma with P[S_n <= n gamma] = target."""
    if not (0.0 < target < 1.0):
        raise InfeasibleError(f"target probability {target!r} outside (0, 1)")
    lo, hi = _sl_bracket(spec, n, min(max(target, 1e-12), 1 - 1e-12))
    return solve_gamma(lambda x: prob_S_le(spec, n, x, cfg), target, lo, hi, cfg)


def _rate_point(kind, blocklength, rate_nats, sol, extra):
    diag = {"target_prob": sol.target_prob, "achieved_prob": sol.achieved_prob,
            "iterations": sol.iterations, **extra}
    status = "ok"
    if math.isinf(rate_nats):
        status = "vacuous"
    return BoundPoint(blocklength, rate_nats / LN2, kind, sol.gamma, sol.residual, diag, status)


def converse_csirt(spec: ChannelSpec, n: int, epsilon: float,
                   cfg: NumericsConfig = DEFAULT_NUMERICS) -> BoundPoint:
    """Meta-converse with CSIRT using statistics of blocklength n.

    The result bounds the rate at blocklength n - 1, which is what the
    returned point carries.
    """
    if int(n) != n or n < 2:
        raise DomainError("converse needs n >= 2")
    _check_eps(epsilon)
    n = int(n)
    sol = solve_converse_gamma(spec, n, epsilon, cfg)
    log_beta = log_prob_L_ge(spec, n, sol.gamma, cfg)
    rate = math.inf if log_beta == -math.inf else -log_beta / (n - 1)
    return _rate_point(BoundKind.CONVERSE, n - 1, rate, sol,
                       {"log_beta": log_beta, "n_statistic": n})


def achievability_csir(spec: ChannelSpec, n: int, epsilon: float, tau: float | None = None,
                       cfg: NumericsConfig = DEFAULT_NUMERICS) -> BoundPoint:
    """kappa-beta lower bound with CSIR, using kappa_tau >= tau."""
    if int(n) != n or n < 2:
        raise DomainError("achievability needs n >= 2")
    _check_eps(epsilon)
    n = int(n)
    tau = 1.0 / n if tau is None else tau
    if not (0.0 < tau < epsilon):
        raise DomainError("tau must lie in (0, epsilon)")
    if epsilon - tau <= cfg.root_tol:
        raise InfeasibleError("epsilon - tau vanishes; the threshold diverges")
    sol = solve_converse_gamma(spec, n, epsilon - tau, cfg)
    log_beta = log_prob_L_ge(spec, n, sol.gamma, cfg)
    if log_beta == -math.inf:
        raise InfeasibleError("beta underflowed; rate is not representable")
    rate = (math.log(tau) - log_beta) / n
    return _rate_point(BoundKind.CSIR, n, rate, sol, {"log_beta": log_beta, "tau": tau})


def nocsi_rate_nats(n: int, r: int, gamma01: float, tau: float) -> float:
    """(1/n) log(tau / F(gamma01; n - r, r)) in nats."""
    log_f = log_regularized_incomplete_beta(gamma01, n - r, r)
    return (math.log(tau) - log_f) / n


def achievability_nocsi(spec: ChannelSpec, n: int, epsilon: float, tau: float | None = None,
                        mode=AngleMode.PROJECTION,
                        cfg: NumericsConfig = DEFAULT_NUMERICS) -> BoundPoint:
    """Angle-threshold decoder bound without CSI."""
    r = spec.num_rx
    if int(n) != n or n <= r:
        raise DomainError("achievability without CSI needs n > r")
    _check_eps(epsilon)
    n = int(n)
    tau = 1.0 / n if tau is None else tau
    if not (0.0 < tau < epsilon):
        raise DomainError("tau must lie in (0, epsilon)")
    mode = AngleMode(mode)
    target = 1.0 - epsilon + tau
    if mode is AngleMode.MC_EXACT:
        sol = _mc_angle_threshold(spec, n, target, cfg)
    else:
        # work in gt = -log(gamma01): the acceptance probability falls as gt grows
        c = outage_capacity_nats(spec, epsilon)
        w = 5.0 / math.sqrt(n) + 1.0
        gt_min = -math.log(GAMMA01_CAP)
        try:
            s = solve_gamma(lambda gt: prob_angle_ge(spec, n, math.exp(-gt), mode, cfg), target,
                            max(c - w, gt_min), c + w, cfg, increasing=False,
                            lower_limit=gt_min)
        except BracketError as exc:
            raise InfeasibleError(f"no threshold below {GAMMA01_CAP} meets the target") from exc
        sol = GammaSolution(math.exp(-s.gamma), s.target_prob, s.achieved_prob, s.iterations)
    rate = nocsi_rate_nats(n, r, sol.gamma, tau)
    extra = {"tau": tau, "mode": mode.value,
             "log_beta_cdf": log_regularized_incomplete_beta(sol.gamma, n - r, r)}
    point = _rate_point(BoundKind.NOCSI, n, rate, sol, extra)
    if rate <= 0:
        point = BoundPoint(point.blocklength, point.rate, point.kind, point.gamma,
                           point.residual, point.diagnostics, "vacuous")
    return point


def _mc_angle_threshold(spec, n, target, cfg):
    from .oracle import McConfig, angle_statistic_samples
    stat = np.sort(angle_statistic_samples(spec, n, McConfig(cfg.mc_samples, cfg.seed),
                                           statistic="exact"))
    # smallest gamma with empirical P[1 - cos^2 <= gamma] >= target
    k = min(int(math.ceil(target * stat.size)), stat.size)
    gamma01 = float(stat[k - 1])
    achieved = k / stat.size
    return GammaSolution(gamma01, target, achieved, 0)


def normal_approx_awgn(snr: float, n: int, epsilon: float, *, mixed_log_term: bool = True) -> float:
    """Normal approximation for the complex AWGN channel, in bits.

    C - sqrt(V/n) Q^{-1}(eps) is converted to bits and log(n)/(2n) is added
    with the natural log, which is the convention of the reference curve.
    With ``mixed_log_term=False`` the log term is converted to bits too.
    """
    if not snr > 0:
        raise DomainError("snr must be positive")
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    _check_eps(epsilon)
    cap = math.log1p(snr)
    disp = (snr * snr + 2.0 * snr) / (1.0 + snr) ** 2
    main = cap - math.sqrt(disp / n) * gaussian_q_inv(epsilon)
    log_term = math.log(n) / (2.0 * n)
    if mixed_log_term:
        return main / LN2 + log_term
    return (main + log_term) / LN2
