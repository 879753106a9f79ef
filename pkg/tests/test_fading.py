import math

import numpy as np
import pytest
from scipy import integrate, stats

from simo_fbl.fading import (
    PointMassGain,
    RicianSimoGain,
    rician_simo_pdf,
    rician_simo_pdf_derivative,
    sample_gain,
)
from simo_fbl.rng import substream
from simo_fbl.specfun import DomainError

GRID = [(k, r) for k in (0.0, 1.0, 10.0, 100.0) for r in (1, 2, 4)]


def _bessel_i0_series(x, terms=400):
    s, t = 0.0, 1.0
    for m in range(terms):
        if m:
            t *= (x / 2) ** 2 / (m * m)
        s += t
    return s


def test_rayleigh_pdf_and_derivative():
    d = RicianSimoGain(0.0, 1)
    assert rician_simo_pdf(d, 0.7) == pytest.approx(math.exp(-0.7), rel=1e-14)
    assert rician_simo_pdf_derivative(d, 0.7) == pytest.approx(-math.exp(-0.7), rel=1e-13)


def test_erlang2_derivative_at_zero():
    assert RicianSimoGain(0.0, 2).pdf_derivative(0.0) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("k,g", [(100.0, 1.0), (100.0, 0.9), (3.0, 0.2)])
def test_single_branch_closed_form(k, g):
    # f_G(g) = (K+1) exp(-K - (K+1) g) I0(2 sqrt(K (K+1) g))
    ref = (k + 1) * math.exp(-k - (k + 1) * g) * _bessel_i0_series(2 * math.sqrt(k * (k + 1) * g))
    assert RicianSimoGain(k, 1).pdf(g) == pytest.approx(ref, rel=1e-12)


def test_two_branch_pdf_against_histogram():
    d = RicianSimoGain(100.0, 2)
    m, g, h = 10 ** 7, 1.5, 0.01
    x = d.sample(substream(5, 0), m)
    p = np.count_nonzero(np.abs(x - g) <= h) / m
    exact = d.cdf(g + h) - d.cdf(g - h)
    assert abs(p - exact) < 3 * math.sqrt(exact * (1 - exact) / m)
    # and the pdf integrates to the same bin mass
    assert integrate.quad(d.pdf, g - h, g + h, epsabs=1e-15)[0] == pytest.approx(exact, abs=1e-12)


def test_derivative_matches_finite_difference():
    d = RicianSimoGain(100.0, 2)
    h = 1e-6
    fd = (d.pdf(1.2 + h) - d.pdf(1.2 - h)) / (2 * h)
    assert d.pdf_derivative(1.2) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("k,r", GRID)
def test_normalization(k, r):
    d = RicianSimoGain(k, r)
    edges = d.quadrature_edges()
    total = sum(integrate.quad(d.pdf, a, b, epsabs=1e-14, epsrel=1e-12)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    total += d.cdf(edges[0]) + d.sf(edges[-1])
    assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("k,r", GRID)
@pytest.mark.parametrize("p", [1e-6, 1e-3, 0.3, 0.5, 0.9, 1 - 1e-6])
def test_quantile_round_trip(k, r, p):
    d = RicianSimoGain(k, r)
    assert d.cdf(d.quantile(p)) == pytest.approx(p, abs=1e-9)


@pytest.mark.parametrize("k,r", GRID)
@pytest.mark.parametrize("g_rel", [0.2, 0.8, 1.5])
def test_derivative_consistency(k, r, g_rel):
    d = RicianSimoGain(k, r)
    g = g_rel * d.mean
    h = 1e-5 * g
    fd = (d.pdf(g + h) - d.pdf(g - h)) / (2 * h)
    assert d.pdf_derivative(g) == pytest.approx(fd, rel=1e-5, abs=1e-9)


@pytest.mark.parametrize("k,r", [(0.0, 1), (1.0, 2), (100.0, 2), (10.0, 4)])
def test_cdf_two_ways(k, r):
    d = RicianSimoGain(k, r)
    for g in (0.3 * d.mean, d.mean, 1.3 * d.mean):
        quad = integrate.quad(d.pdf, 0.0, g, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        assert d.cdf(g) == pytest.approx(quad, abs=1e-9)
        scaled = stats.ncx2.cdf(2 * (k + 1) * g, 2 * r, 2 * r * k)
        assert d.cdf(g) == pytest.approx(scaled, abs=1e-9)


def test_r2_pdf_against_scaled_ncx2():
    # 2 (K+1) G is ncchi2(4, 4K)
    d = RicianSimoGain(100.0, 2)
    for g in (1.5, 2.0, 2.5):
        ref = 2 * 101 * stats.ncx2.pdf(2 * 101 * g, 4, 400.0)
        assert d.pdf(g) == pytest.approx(ref, rel=1e-9)


def test_sample_mean():
    d = RicianSimoGain(100.0, 2)
    x = d.sample(substream(1, 0), 10 ** 6)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - 2.0) < 5 * se


def test_rayleigh_samples_ks():
    x = RicianSimoGain(0.0, 1).sample(substream(2, 0), 10 ** 5)
    assert stats.kstest(x, "expon").pvalue > 1e-3


def test_empirical_cdf_sup_distance():
    d = RicianSimoGain(100.0, 2)
    x = np.sort(d.sample(substream(3, 0), 10 ** 6))
    grid = np.linspace(x[100], x[-100], 400)
    emp = np.searchsorted(x, grid, side="right") / x.size
    assert np.max(np.abs(emp - d.cdf(grid))) < 4e-3


def test_sample_gain_scalar_and_array():
    d = RicianSimoGain(1.0, 2)
    assert isinstance(sample_gain(d, substream(0, 0)), float)
    assert sample_gain(d, substream(0, 0), 7).shape == (7,)


def test_branch_samples_have_requested_power():
    h = RicianSimoGain(10.0, 3).sample_branches(substream(4, 0), 200_000)
    assert h.shape == (200_000, 3)
    assert np.allclose(np.mean(np.abs(h) ** 2, axis=0), 1.0, atol=0.01)


@pytest.mark.parametrize("kwargs", [dict(k_factor=-1.0), dict(k_factor=1.0, num_rx=0),
                                    dict(k_factor=1.0, branch_power=0.0)])
def test_invalid_parameters(kwargs):
    with pytest.raises(DomainError):
        RicianSimoGain(**kwargs)


def test_domain_errors():
    d = RicianSimoGain(1.0, 1)
    with pytest.raises(DomainError):
        rician_simo_pdf(d, -0.1)
    with pytest.raises(DomainError):
        rician_simo_pdf_derivative(d, 0.0)
    with pytest.raises(DomainError):
        d.quantile(1.0)


def test_point_mass():
    d = PointMassGain(2.0, 2)
    assert d.quantile(0.3) == 2.0
    assert d.cdf(1.9) == 0.0 and d.cdf(2.0) == 1.0
    h = d.sample_branches(substream(0, 0), 10)
    assert np.allclose(np.sum(np.abs(h) ** 2, axis=1), 2.0)
    with pytest.raises(DomainError):
        d.pdf(2.0)


def test_branch_power_scaling():
    d1, d2 = RicianSimoGain(3.0, 2), RicianSimoGain(3.0, 2, branch_power=2.0)
    assert d2.pdf(2.0) == pytest.approx(0.5 * d1.pdf(1.0), rel=1e-13)
    assert d2.mean == 4.0
