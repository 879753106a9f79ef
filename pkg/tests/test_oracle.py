import math

import numpy as np
import pytest
from scipy import stats

from simo_fbl.fading import PointMassGain, RicianSimoGain
from simo_fbl.oracle import (
    McConfig,
    _orthonormalize,
    angle_statistic_samples,
    mc_error_probability_of_threshold_code,
    mc_prob_angle_ge,
    mc_prob_L_ge,
    mc_prob_S_le,
    null_angle_statistic_samples,
)
from simo_fbl.rng import complex_normal, substream
from simo_fbl.specfun import DomainError, regularized_incomplete_beta
from simo_fbl.stats import ChannelSpec, prob_S_le, reference_channel

REF = reference_channel()
RICIAN1 = ChannelSpec(1.0, RicianSimoGain(1.0, 1))


def test_threshold_limits():
    mc = McConfig(5000, seed=1)
    est = mc_prob_S_le(REF, 10, math.inf, mc)
    assert est.mean == 1.0 and est.stderr == 0.0
    assert mc_prob_L_ge(REF, 10, -math.inf, mc).mean == 1.0
    lo, hi = mc_prob_angle_ge(REF, 10, [0.0, 1.0], mc)
    assert lo.mean == 0.0 and hi.mean == 1.0


def test_noiseless_single_branch_is_aligned():
    s = angle_statistic_samples(RICIAN1, 6, McConfig(2000), noise_scale=0.0)
    assert np.allclose(s, 0.0, atol=1e-12)


@pytest.mark.parametrize("n,r,gam", [(30, 2, 0.9), (10, 1, 0.7), (12, 3, 0.5)])
def test_null_statistic_beta_law(n, r, gam):
    spec = ChannelSpec(1.0, RicianSimoGain(1.0, r))
    est = mc_error_probability_of_threshold_code(spec, n, gam, McConfig(200_000, seed=5))
    p = regularized_incomplete_beta(gam, n - r, r)
    assert abs(est.mean - p) < 4 * est.stderr


def test_null_statistic_endpoints():
    s = null_angle_statistic_samples(REF, 8, McConfig(20_000))
    assert np.all((s >= -1e-12) & (s <= 1 + 1e-12))
    e0, e1 = mc_error_probability_of_threshold_code(REF, 8, [0.0, 1.0 + 1e-9], McConfig(20_000))
    assert e0.mean == 0.0 and e1.mean == 1.0


@pytest.mark.parametrize("fn", ["S", "angle"])
def test_reproducible_across_workers(fn):
    def run(w):
        mc = McConfig(50_000, seed=77, workers=w, batch_size=4096)
        if fn == "S":
            return mc_prob_S_le(REF, 10, 0.6, mc).mean
        return mc_prob_angle_ge(REF, 10, 0.4, mc).mean

    assert run(1) == run(4)


def test_seed_changes_estimate():
    a = mc_prob_S_le(REF, 10, 0.6, McConfig(50_000, seed=1)).mean
    b = mc_prob_S_le(REF, 10, 0.6, McConfig(50_000, seed=2)).mean
    assert a != b


def test_point_mass_n1_against_ncx2():
    # n = 1, G = g: S <= gamma reduces to a single ncchi2(2, 2/rg) tail
    g, rho, gam = 1.0, 1.0, 0.3
    spec = ChannelSpec(rho, PointMassGain(g))
    rg = rho * g
    t = (2 / rg) * (1 + rg) * (math.log1p(rg) + 1 - gam)
    ref = stats.ncx2.sf(t, 2, 2 / rg)
    assert prob_S_le(spec, 1, gam) == pytest.approx(ref, abs=1e-12)
    est = mc_prob_S_le(spec, 1, gam, McConfig(10 ** 6, seed=8))
    assert abs(est.mean - ref) < 4 * est.stderr


def test_orthonormalize():
    y = complex_normal(substream(3, 0), (50, 9, 3))
    q, ok = _orthonormalize(y)
    assert ok.all()
    gram = np.einsum("bnj,bnk->bjk", q.conj(), q)
    assert np.allclose(gram, np.eye(3), atol=1e-12)


def test_orthonormalize_flags_rank_deficient():
    y = complex_normal(substream(3, 0), (4, 6, 2))
    y[:, :, 1] = 2.0 * y[:, :, 0]
    _, ok = _orthonormalize(y)
    assert not ok.any()


def test_sample_floor_and_domain():
    with pytest.raises(DomainError):
        mc_prob_S_le(REF, 10, 0.6, McConfig(100))
    with pytest.raises(DomainError):
        mc_prob_angle_ge(REF, 2, 0.5, McConfig(5000))
    with pytest.raises(DomainError):
        McConfig(0)
    with pytest.raises(DomainError):
        mc_prob_angle_ge(REF, 10, 0.5, McConfig(5000), statistic="other")
