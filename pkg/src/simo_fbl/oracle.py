"""Monte Carlo twins of every probability computed semi-analytically.

Each estimator simulates the defining sums directly: sample G, sample the
complex Gaussian noise, form the statistic, count threshold crossings.
Batch ``b`` always draws from ``substream(seed, b)`` and per-batch hit
counts are integers, so the aggregate is exact and identical for any
number of workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rng import complex_normal, substream
from .specfun import DomainError
from .stats import ChannelSpec

_ELEMENT_BUDGET = 1 << 20  # complex entries per batch


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SIMO_FBL_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int = 20140101
    batch_size: int = 8192
    workers: int | None = None

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise DomainError("samples must be a positive integer")
        if self.batch_size < 1:
            raise DomainError("batch_size must be positive")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int
    discarded: int = 0

    def z_score(self, p0: float) -> float:
        """Distance to a hypothesized probability in null-hypothesis standard errors."""
        se = math.sqrt(max(p0 * (1.0 - p0), 0.0) / self.samples)
        diff = abs(self.mean - p0)
        if se == 0.0:
            return 0.0 if diff <= 1e-15 else math.inf
        return diff / se


def _estimate(hits: int, total: int, seed: int, discarded: int = 0) -> McEstimate:
    mean = hits / total if total else math.nan
    stderr = math.sqrt(mean * (1.0 - mean) / total) if total else math.nan
    return McEstimate(mean, stderr, total, seed, discarded)


def _batches(mc: McConfig, width: int):
    size = max(1, min(mc.batch_size, _ELEMENT_BUDGET // max(width, 1)))
    count = -(-mc.samples // size)
    return [(b, min(size, mc.samples - b * size)) for b in range(count)]


def run_batches(kernel, mc: McConfig, width: int):
    """Apply kernel(rng, size) over all batches and sum the returned arrays."""
    jobs = _batches(mc, width)
    workers = mc.workers or default_workers()

    def one(job):
        b, size = job
        return kernel(substream(mc.seed, b), size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    return parts


def _thresholds(x):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    return arr, np.ndim(x) == 0


def _count_le(values, thresholds):
    # hits[k] = #{values <= thresholds[k]}
    s = np.sort(values)
    return np.searchsorted(s, thresholds, side="right").astype(np.int64)


def _pack(hits, totals, scalar, mc, discarded=0):
    ests = [_estimate(int(h), int(totals), mc.seed, discarded) for h in hits]
    return ests[0] if scalar else ests


def _check_samples(mc):
    if mc.samples < 1000:
        raise DomainError("Monte Carlo estimators need at least 1e3 samples")


# ---------------------------------------------------------------------------
# S_n and L_n


def _sl_kernel(spec, n, auxiliary):
    rho = spec.snr

    def kernel(rng, size):
        g = spec.gain.sample(rng, size)
        z = complex_normal(rng, (size, n))
        rg = rho * g
        a = np.sqrt(rg)[:, None]
        if auxiliary:
            dev = a * z - np.sqrt(1.0 + rg)[:, None]
            stat = n * np.log1p(rg) + np.sum(1.0 - (dev.real ** 2 + dev.imag ** 2), axis=1)
        else:
            dev = a * z - 1.0
            stat = n * np.log1p(rg) + np.sum(
                1.0 - (dev.real ** 2 + dev.imag ** 2) / (1.0 + rg)[:, None], axis=1)
        return stat / n

    return kernel


def _stat_samples(kernel, mc, width):
    return np.concatenate(run_batches(kernel, mc, width))


def mc_prob_S_le(spec: ChannelSpec, n: int, gamma, mc: McConfig):
    """P[S_n <= n gamma] by direct simulation; gamma may be a sequence."""
    _check_samples(mc)
    gam, scalar = _thresholds(gamma)
    parts = run_batches(lambda rng, size: _count_le(_sl_kernel(spec, n, False)(rng, size), gam), mc, n)
    return _pack(np.sum(parts, axis=0), mc.samples, scalar, mc)


def mc_prob_L_ge(spec: ChannelSpec, n: int, gamma, mc: McConfig):
    """P[L_n >= n gamma] under the auxiliary channel."""
    _check_samples(mc)
    gam, scalar = _thresholds(gamma)
    kern = _sl_kernel(spec, n, True)

    def count(rng, size):
        s = np.sort(kern(rng, size))
        return (size - np.searchsorted(s, gam, side="left")).astype(np.int64)

    parts = run_batches(count, mc, n)
    return _pack(np.sum(parts, axis=0), mc.samples, scalar, mc)


# ---------------------------------------------------------------------------
# angle statistics


def _orthonormalize(y):
    """Two-pass modified Gram-Schmidt on the columns of each y[b] (b, n, r).

    Returns (q, ok) where ok flags samples of full column rank.
    """
    q = np.array(y, dtype=complex)
    ok = np.ones(q.shape[0], dtype=bool)
    for k in range(q.shape[2]):
        v = q[:, :, k]
        ref = np.linalg.norm(y[:, :, k], axis=1)
        for _ in range(2):
            for j in range(k):
                qj = q[:, :, j]
                v = v - np.sum(qj.conj() * v, axis=1)[:, None] * qj
        nrm = np.linalg.norm(v, axis=1)
        good = nrm > 1e-13 * ref
        ok &= good
        q[:, :, k] = v / np.where(good, nrm, 1.0)[:, None]
    return q, ok


def _channel_output(spec, n, rng, size, noise_scale=1.0):
    h = spec.gain.sample_branches(rng, size)
    w = complex_normal(rng, (size, n, spec.num_rx))
    x0 = math.sqrt(spec.snr)
    y = x0 * h[:, None, :] + noise_scale * w
    return y, h


def _one_minus_cos2(a, q):
    # 1 - ||a^H Q||^2 / ||a||^2 per sample; a (b, n), q (b, n, r)
    proj = np.einsum("bn,bnr->br", a.conj(), q)
    num = np.sum(proj.real ** 2 + proj.imag ** 2, axis=1)
    den = np.sum(a.real ** 2 + a.imag ** 2, axis=1)
    return 1.0 - num / den


def _angle_kernel(spec, n, statistic, noise_scale=1.0):
    rho = spec.snr
    if statistic not in ("exact", "projection", "relaxed"):
        raise DomainError(f"unknown angle statistic {statistic!r}")

    def kernel(rng, size):
        if statistic == "relaxed":
            g = spec.gain.sample(rng, size)
            z = complex_normal(rng, (size, n))
            num = np.sum(z.real ** 2 + z.imag ** 2, axis=1)
            shifted = z + np.sqrt(rho * g)[:, None]
            den = np.sum(shifted.real ** 2 + shifted.imag ** 2, axis=1)
            return num / den, 0
        y, h = _channel_output(spec, n, rng, size, noise_scale)
        ones = np.ones((size, n), dtype=complex)
        if statistic == "projection":
            v = np.einsum("bnr,br->bn", y, h.conj())
            nv = np.linalg.norm(v, axis=1)
            return _one_minus_cos2(ones, (v / nv[:, None])[:, :, None]), 0
        q, ok = _orthonormalize(y)
        return _one_minus_cos2(ones[ok], q[ok]), int(np.sum(~ok))

    return kernel


def angle_statistic_samples(spec: ChannelSpec, n: int, mc: McConfig, statistic: str = "exact",
                            noise_scale: float = 1.0) -> np.ndarray:
    """Samples of 1 - cos^2 theta(x0, Y) (or the relaxed ratio) under P_{Y|x0}."""
    if n <= spec.num_rx:
        raise DomainError("the angle statistic needs n > r")
    kern = _angle_kernel(spec, n, statistic, noise_scale)
    return np.concatenate([p[0] for p in run_batches(kern, mc, n * spec.num_rx)])


def mc_prob_angle_ge(spec: ChannelSpec, n: int, gamma01, mc: McConfig, statistic: str = "exact",
                     noise_scale: float = 1.0):
    """P[cos^2 theta(x0, Y) >= 1 - gamma01].

    ``statistic`` selects the exact subspace angle, the projection onto
    Y conj(h), or the relaxed ratio sum|Z|^2 / sum|Z + sqrt(G rho)|^2 whose
    probability the semi-analytic projection mode computes.
    """
    _check_samples(mc)
    if n <= spec.num_rx:
        raise DomainError("the angle statistic needs n > r")
    gam, scalar = _thresholds(gamma01)
    kern = _angle_kernel(spec, n, statistic, noise_scale)

    def count(rng, size):
        vals, dropped = kern(rng, size)
        return np.concatenate([_count_le(vals, gam), [vals.size, dropped]])

    tot = np.sum(run_batches(count, mc, n * spec.num_rx), axis=0)
    hits, kept, dropped = tot[:-2], int(tot[-2]), int(tot[-1])
    return _pack(hits, kept, scalar, mc, dropped)


def null_angle_statistic_samples(spec: ChannelSpec, n: int, mc: McConfig) -> np.ndarray:
    """1 - cos^2 theta(a, Y) for an independent codeword a ~ CN(0, I_n)."""
    if n <= spec.num_rx:
        raise DomainError("the angle statistic needs n > r")

    def kernel(rng, size):
        y, _ = _channel_output(spec, n, rng, size)
        a = complex_normal(rng, (size, n))
        q, ok = _orthonormalize(y)
        return _one_minus_cos2(a[ok], q[ok])

    return np.concatenate(run_batches(kernel, mc, n * (spec.num_rx + 1)))


def mc_error_probability_of_threshold_code(spec: ChannelSpec, n: int, gamma01, mc: McConfig):
    """P[an independent random codeword passes the angle test at gamma01]."""
    _check_samples(mc)
    gam, scalar = _thresholds(gamma01)
    vals = null_angle_statistic_samples(spec, n, mc)
    return _pack(_count_le(vals, gam), vals.size, scalar, mc, mc.samples - vals.size)
