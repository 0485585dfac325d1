"""Brute-force sampling oracle for the four expectation terms and the
statistical rate.  Trials are drawn in fixed-size batches, each batch from an
independent substream keyed by (seed, batch index), so results do not depend
on the number of worker threads.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .channel import LosStructure, rician_mix, sinc_moment
from .scenario import ChannelStatistics, HwiProfile, SystemConfig, link_weights

_BATCH_TARGET_BYTES = 48 * 2**20
_DEFAULT_BATCH = 500
_Z = 3.0   # half-width multiplier


@dataclass
class McEstimate:
    mean: np.ndarray
    half_width: np.ndarray
    trials: int


@dataclass
class TermEstimates:
    signal: McEstimate        # (K,)
    interference: McEstimate  # (K, K), zero diagonal
    hwi: McEstimate           # (K,)
    noise: McEstimate         # (K,)


class _Welford:
    """Streaming mean / spread over leading trial axis, mergeable per batch."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add_batch(self, x):
        nb = x.shape[0]
        bmean = x.mean(axis=0)
        bm2 = ((x - bmean) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, bmean, bm2
            return
        delta = bmean - self.mean
        n = self.n + nb
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + bm2 + delta**2 * (self.n * nb / n)
        self.n = n

    def estimate(self):
        std = np.sqrt(self.m2 / max(self.n - 1, 1))
        return McEstimate(
            mean=self.mean.copy(),
            half_width=_Z * std / math.sqrt(self.n),
            trials=self.n,
        )


def receiver_distortion_diag(theta, stats, los, hwi, config, powers):
    """Deterministic per-antenna variance of the AP-side distortion,
    kappa_b^2 (1+kappa_u^2) sum_i p_i E{|qhat_i[l,b]|^2}, shape (L, B).

    The second moment per entry is gamma + R*sum_s c*(delta*(eps*(1-sinc^2)+1)
    + eps + 1) plus sinc^2 times the squared beam-weighted LoS mean; steering
    entries have unit modulus so the rank-1 LoS pieces contribute exactly 1
    per antenna to the isotropic part.
    """
    L, S, K = stats.dims
    R = config.R
    w = link_weights(stats)
    s2 = sinc_moment(hwi.kappa_r) ** 2
    v = np.exp(1j * np.asarray(theta, dtype=float).reshape(S, R))
    F = np.einsum("lsr,sr,skr->lsk", los.a_R_dep.conj(), v, los.a_R)
    u = np.einsum("lsk,lsk,lsb->lkb", w.w_cde, F, los.a_B)
    iso = stats.gamma + R * np.einsum(
        "lsk->lk", w.m_cd + (1.0 - s2) * w.m_cde + w.m_ce + w.c
    )
    per_entry = iso[:, :, None] + s2 * (u.conj() * u).real        # (L, K, B)
    scale = hwi.kappa_b**2 * (1.0 + hwi.kappa_u**2)
    return scale * np.einsum("lkb,k->lb", per_entry, np.asarray(powers, dtype=float))


def _prepare(theta, stats, los, hwi, config, powers):
    L, S, K = stats.dims
    B, R = config.B, config.R
    lo_h, nlo_h, lo_z, nlo_z = rician_mix(stats)
    powers = np.asarray(powers, dtype=float)
    return SimpleNamespace(
        L=L, S=S, K=K, B=B, R=R,
        v=np.exp(1j * np.asarray(theta, dtype=float).reshape(S, R)),
        a_R=los.a_R, zbar=los.zbar,
        sqrt_alpha=np.sqrt(stats.alpha), sqrt_beta=np.sqrt(stats.beta),
        sqrt_gamma=np.sqrt(stats.gamma),
        lo_h=lo_h, nlo_h=nlo_h, lo_z=lo_z, nlo_z=nlo_z,
        kappa_u=hwi.kappa_u, kappa_b=hwi.kappa_b, kappa_r=hwi.kappa_r,
        powers=powers,
        eta_r_std=np.sqrt(receiver_distortion_diag(theta, stats, los, hwi, config, powers)),
    )


def _cn(rng, shape):
    return math.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _sample_batch(prep, seed, batch_index, nb):
    rng = np.random.default_rng(np.random.SeedSequence((seed, batch_index)))
    T, L, S, K, B, R = nb, prep.L, prep.S, prep.K, prep.B, prep.R

    h_t = _cn(rng, (T, S, K, R))
    z_t = _cn(rng, (T, L, S, B, R))
    d = prep.sqrt_gamma[None, :, :, None] * _cn(rng, (T, L, K, B))
    noise_ang = rng.uniform(-prep.kappa_r * np.pi, prep.kappa_r * np.pi, size=(T, S, R))
    eta_t = prep.kappa_u * np.sqrt(prep.powers)[None, :] * _cn(rng, (T, K))

    h = prep.sqrt_alpha[None, :, :, None] * (
        prep.lo_h[None, :, :, None] * prep.a_R[None] + prep.nlo_h[None, :, :, None] * h_t
    )
    z = prep.sqrt_beta[None, :, :, None, None] * (
        prep.lo_z[None, :, :, None, None] * prep.zbar[None]
        + prep.nlo_z[None, :, :, None, None] * z_t
    )
    phi_hat = prep.v[None] * np.exp(1j * noise_ang)          # (T, S, R)
    qhat = np.einsum("tlsbr,tsr,tskr->tlkb", z, phi_hat, h) + d
    q = np.einsum("tlsbr,sr,tskr->tlkb", z, prep.v, h) + d

    M = np.einsum("tlkb,tlib->tki", q.conj(), qhat)          # combiner x received
    m2 = (M.conj() * M).real
    noise_s = np.einsum("tlkb,tlkb->tk", q.conj(), q).real
    signal_s = np.einsum("tkk->tk", m2).copy()
    intf_s = m2.copy()
    idx = np.arange(K)
    intf_s[:, idx, idx] = 0.0

    eta_r = prep.eta_r_std[None] * _cn(rng, (T, L, B))
    qe = np.einsum("tlkb,tlb->tk", q.conj(), eta_r)
    hwi_s = np.einsum("tki,ti->tk", m2, (eta_t.conj() * eta_t).real) + (qe.conj() * qe).real
    return signal_s, intf_s, hwi_s, noise_s


def _batch_plan(trials, batch_size, prep):
    if batch_size is None:
        per_trial = max(prep.L * prep.S * prep.B * prep.R * 16 * 3, 1)
        batch_size = max(1, min(_DEFAULT_BATCH, _BATCH_TARGET_BYTES // per_trial))
    sizes = []
    left = trials
    while left > 0:
        nb = min(batch_size, left)
        sizes.append(nb)
        left -= nb
    return sizes


def estimate_terms(theta, stats, los, hwi, config, powers=None, trials=100_000,
                   seed=0, threads=1, batch_size=None, csv_dump=None) -> TermEstimates:
    """Sample-mean estimates of the four per-user terms.

    Per trial: draw every fast-fading quantity, build the received (phase
    noise applied) and combiner-side aggregated channels, draw the transmit
    and receive distortions, and accumulate the squared detection products.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    prep = _prepare(theta, stats, los, hwi, config, powers)
    sizes = _batch_plan(trials, batch_size, prep)

    K = prep.K
    accs = [_Welford((K,)), _Welford((K, K)), _Welford((K,)), _Welford((K,))]
    rows = []

    def run(idx_nb):
        idx, nb = idx_nb
        return idx, _sample_batch(prep, seed, idx, nb)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, enumerate(sizes)))
    else:
        results = [run(x) for x in enumerate(sizes)]
    results.sort(key=lambda r: r[0])
    for idx, batch in results:
        for acc, x in zip(accs, batch):
            acc.add_batch(x)
        if csv_dump is not None:
            rows.append([idx, batch[0].shape[0]] + [float(x.mean()) for x in batch])

    if csv_dump is not None:
        with open(csv_dump, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["batch", "trials", "signal", "interference", "hwi", "noise"])
            writer.writerows(rows)

    sig, intf, hwi_e, noi = (acc.estimate() for acc in accs)
    return TermEstimates(signal=sig, interference=intf, hwi=hwi_e, noise=noi)


def estimate_rate(theta, stats, los, hwi, config, powers=None, trials=100_000,
                  seed=0, threads=1, batch_size=None):
    """Per-user rate from the sampled term means, combined through the same
    signal / (interference + distortion + noise) ratio as the closed form.
    Returns (rates (K,), TermEstimates).
    """
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    est = estimate_terms(theta, stats, los, hwi, config, powers, trials=trials,
                         seed=seed, threads=threads, batch_size=batch_size)
    denom = (
        np.einsum("ki,i->k", est.interference.mean, powers)
        + est.hwi.mean
        + config.sigma2 * est.noise.mean
    )
    sinr = powers * est.signal.mean / denom
    return np.log2(1.0 + sinr), est
