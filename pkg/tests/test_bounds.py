import math

import numpy as np
import pytest

from simo_fbl.bounds import (
    LN2,
    BoundKind,
    InfeasibleError,
    achievability_csir,
    achievability_nocsi,
    converse_csirt,
    nocsi_rate_nats,
    normal_approx_awgn,
    outage_capacity,
    outage_capacity_nats,
)
from simo_fbl.fading import GainDistribution, PointMassGain, RicianSimoGain
from simo_fbl.oracle import McConfig, angle_statistic_samples, mc_prob_L_ge, mc_prob_S_le
from simo_fbl.specfun import DomainError, gaussian_q_inv, log_regularized_incomplete_beta
from simo_fbl.stats import AngleMode, ChannelSpec, reference_channel

EPS = 1e-3
REF = reference_channel()
RAYLEIGH = ChannelSpec(1.0, RicianSimoGain(0.0, 1))


class _GappedUniform(GainDistribution):
    """Uniform on [0, 1] u [2, 3]: the CDF is flat at 1/2."""

    num_rx = 1

    def pdf(self, g):
        return 0.5 if (0 <= g <= 1 or 2 <= g <= 3) else 0.0

    def logpdf(self, g):
        return math.log(max(self.pdf(g), 1e-320))

    def pdf_derivative(self, g):
        return 0.0

    def cdf(self, g):
        return float(np.clip(0.5 * min(g, 1.0) + 0.5 * max(min(g, 3.0) - 2.0, 0.0), 0.0, 1.0))

    def sf(self, g):
        return 1.0 - self.cdf(g)

    @property
    def mean(self):
        return 1.5

    def sample_branches(self, rng, size):
        raise NotImplementedError


def test_outage_awgn_is_one_bit():
    spec = ChannelSpec(1.0, PointMassGain(1.0))
    for eps in (1e-3, 0.5):
        assert outage_capacity(spec, eps) == pytest.approx(1.0, abs=1e-15)


def test_outage_reference_point():
    assert outage_capacity(REF, EPS) == pytest.approx(1.0, abs=0.005)


def test_outage_rayleigh_closed_form():
    assert outage_capacity(RAYLEIGH, 0.1) == pytest.approx(math.log2(1 - math.log(0.9)), rel=1e-12)


def test_outage_flat_cdf_rejected():
    with pytest.raises(DomainError):
        outage_capacity_nats(ChannelSpec(1.0, _GappedUniform()), 0.5)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.2])
def test_epsilon_domain(eps):
    with pytest.raises(DomainError):
        outage_capacity(REF, eps)


def test_converse_at_300():
    pt = converse_csirt(REF, 301, EPS)
    c = outage_capacity(REF, EPS)
    assert pt.blocklength == 300
    assert pt.kind is BoundKind.CONVERSE
    assert 0.9 * c <= pt.rate <= c
    assert pt.residual <= 1e-9


def test_converse_large_n_approaches_capacity():
    pt = converse_csirt(REF, 10 ** 4, EPS)
    assert abs(pt.rate - outage_capacity(REF, EPS)) < 0.01


def test_converse_through_mc():
    n, eps = 5, 0.1
    pt = converse_csirt(RAYLEIGH, n, eps)
    mc = McConfig(10 ** 7, seed=21)
    s = mc_prob_S_le(RAYLEIGH, n, pt.gamma, mc)
    assert abs(s.mean - eps) < 4 * s.stderr
    b = mc_prob_L_ge(RAYLEIGH, n, pt.gamma, mc)
    rate_mc = -math.log(b.mean) / (n - 1) / LN2
    se = b.stderr / b.mean / (n - 1) / LN2
    assert abs(rate_mc - pt.rate) < 4 * se


def test_converse_rejects_short_blocks():
    with pytest.raises(DomainError):
        converse_csirt(REF, 1, EPS)


def test_csir_crosses_ninety_percent_in_bracket():
    c = outage_capacity(REF, EPS)
    tau = EPS / 10
    assert achievability_csir(REF, 120, EPS, tau).rate < 0.9 * c
    assert achievability_csir(REF, 320, EPS, tau).rate >= 0.9 * c


def test_csir_through_mc():
    n, eps = 30, 0.1
    tau = 1.0 / n
    pt = achievability_csir(RAYLEIGH, n, eps)
    assert pt.diagnostics["tau"] == tau
    mc = McConfig(10 ** 6, seed=22)
    s = mc_prob_S_le(RAYLEIGH, n, pt.gamma, mc)
    assert abs(s.mean - (eps - tau)) < 4 * s.stderr
    b = mc_prob_L_ge(RAYLEIGH, n, pt.gamma, mc)
    rate_mc = (math.log(tau) - math.log(b.mean)) / n / LN2
    assert abs(rate_mc - pt.rate) < 4 * b.stderr / b.mean / n / LN2


def test_tau_limits():
    with pytest.raises(DomainError):
        achievability_csir(REF, 200, EPS, tau=EPS)
    with pytest.raises(InfeasibleError):
        achievability_csir(REF, 200, EPS, tau=EPS * (1 - 1e-12))
    # the default tau = 1/n is not below eps for n <= 1/eps
    with pytest.raises(DomainError):
        achievability_csir(REF, 500, EPS)
    with pytest.raises(DomainError):
        achievability_nocsi(REF, 500, EPS)


def test_nocsi_forced_threshold_is_vacuous():
    assert nocsi_rate_nats(50, 2, 1.0, 0.01) == pytest.approx(math.log(0.01) / 50)
    assert nocsi_rate_nats(50, 2, 1.0, 0.01) < 0


def test_nocsi_rate_formula():
    pt = achievability_nocsi(REF, 300, EPS, tau=2e-4)
    ref = (math.log(2e-4) - log_regularized_incomplete_beta(pt.gamma, 298, 2)) / 300 / LN2
    assert pt.rate == pytest.approx(ref, rel=1e-13)
    assert pt.residual <= 1e-9


def test_nocsi_exact_angle_not_worse_than_projection():
    n, tau = 20, 1e-4
    m = 10 ** 6
    proj = achievability_nocsi(REF, n, EPS, tau)
    stat = np.sort(angle_statistic_samples(REF, n, McConfig(m), statistic="exact"))
    p = 1 - EPS + tau
    # order statistic three binomial standard deviations above the target index
    k = min(int(math.ceil(p * m + 3 * math.sqrt(m * p * (1 - p)))), m)
    upper = nocsi_rate_nats(n, 2, float(stat[k - 1]), tau) / LN2
    assert proj.rate <= upper
    pt = achievability_nocsi(REF, n, EPS, tau, mode=AngleMode.MC_EXACT)
    assert pt.diagnostics["mode"] == "mc-exact"


def test_sandwich_small_grid():
    for n in (1500, 3000):
        lo = achievability_nocsi(REF, n, EPS).rate
        mid = achievability_csir(REF, n, EPS).rate
        hi = converse_csirt(REF, n + 1, EPS).rate
        assert lo <= mid + 1e-6 <= hi + 2e-6


@pytest.mark.parametrize("bound", ["converse", "csir", "nocsi"])
def test_log_n_over_n_convergence(bound):
    c = outage_capacity(REF, EPS)
    ns = [2000, 4000, 10000]
    fns = {"converse": lambda n: converse_csirt(REF, n + 1, EPS),
           "csir": lambda n: achievability_csir(REF, n, EPS),
           "nocsi": lambda n: achievability_nocsi(REF, n, EPS)}
    a = [abs(fns[bound](n).rate - c) * n / math.log(n) for n in ns]
    assert max(a) / min(a) < 3.0


def test_rates_grow_with_epsilon():
    for n in (200, 800):
        assert converse_csirt(REF, n, 1e-3).rate <= converse_csirt(REF, n, 1e-2).rate
        assert achievability_csir(REF, n, 1e-3, 1e-4).rate <= achievability_csir(REF, n, 1e-2, 1e-4).rate


def test_normal_approx_limits():
    assert normal_approx_awgn(1.0, 10 ** 8, 0.5) == pytest.approx(1.0, abs=1e-6)
    rho, n = 10 ** (-0.155), 1000
    c, v = math.log1p(rho), (rho ** 2 + 2 * rho) / (1 + rho) ** 2
    ref = (c - math.sqrt(v / n) * gaussian_q_inv(EPS)) / LN2 + math.log(n) / (2 * n)
    assert normal_approx_awgn(rho, n, EPS) == pytest.approx(ref, rel=1e-14)


def test_normal_approx_crossing():
    n = 2
    while normal_approx_awgn(1.0, n, EPS) < 0.9:
        n += 1
    assert abs(n - 1420) <= 30


def test_normal_approx_consistent_units_variant():
    diff = normal_approx_awgn(1.0, 100, EPS, mixed_log_term=False) - normal_approx_awgn(1.0, 100, EPS)
    assert diff == pytest.approx(math.log(100) / 200 * (1 / LN2 - 1), rel=1e-12)


def test_point_mass_converse_runs():
    spec = ChannelSpec(1.0, PointMassGain(1.0))
    pt = converse_csirt(spec, 500, EPS)
    assert pt.rate > 0 and math.isfinite(pt.rate)
