"""Special-case SINR formulas (surface-free, NLoS-only) and the large-array
power-scaling limits.  Each expression is implemented directly from its
printed form, independent of the general rate engine, so the equality tests
between the two paths are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import array_response, sinc_moment
from .scenario import ChannelStatistics, HwiProfile, SystemConfig

CASES = ("NL_B", "NL_R", "NL_BR", "OL_B")


@dataclass
class ScalingMode:
    mode: str = "none"            # none | per_B | per_R | per_BR | per_R2
    p: float = 1.0                # reference power, watts

    def effective_power(self, B, R):
        scale = {"none": 1.0, "per_B": B, "per_R": R,
                 "per_BR": B * R, "per_R2": R**2}[self.mode]
        return self.p / scale


def _hbar_table(stats: ChannelStatistics, config: SystemConfig):
    S, K = stats.alpha.shape
    R, dl = config.R, config.d_over_lambda
    h = np.empty((S, K, R), dtype=complex)
    for s in range(S):
        for k in range(K):
            az, el = stats.aoa_ris[s, k]
            h[s, k] = array_response(R, az, el, dl)
    return h


def _f_table(stats: ChannelStatistics, config: SystemConfig, theta):
    L, S, K = stats.dims
    R, dl = config.R, config.d_over_lambda
    hbar = _hbar_table(stats, config)
    a_dep = np.empty((L, S, R), dtype=complex)
    for l in range(L):
        for s in range(S):
            az, el = stats.aod_ris[l, s]
            a_dep[l, s] = array_response(R, az, el, dl)
    v = np.exp(1j * np.asarray(theta, dtype=float).reshape(S, R))
    F = np.einsum("lsr,sr,skr->lsk", a_dep.conj(), v, hbar)
    ar_cross = np.einsum("lsr,msr->slm", a_dep.conj(), a_dep)
    return F, ar_cross


def sinr_ris_free(stats: ChannelStatistics, hwi: HwiProfile, config: SystemConfig,
                  powers=None, k=0, B=None):
    """Surface-free uplink SINR of user k (direct links only).

    B may override the configured antenna count; the expression treats it as
    a plain number, so asymptotic probes need not build steering vectors.
    """
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    B = config.B if B is None else B
    gam = stats.gamma
    ku2, kb2 = hwi.kappa_u**2, hwi.kappa_b**2
    p_k = powers[k]
    g_sum = gam[:, k].sum()
    num = p_k * ((g_sum * B) ** 2 + (gam[:, k] ** 2).sum() * B)
    den = (
        p_k * ku2 * (g_sum * B) ** 2
        + np.sum(gam[:, k] * B * (config.sigma2 - p_k * gam[:, k]))
        + (1.0 + kb2) * (1.0 + ku2)
        * np.einsum("i,l,li->", powers, gam[:, k], gam) * B
    )
    return float(num / den)


def _u4_hh_quartic(cnl, eps, HH, k, i, R_weight=1.0):
    # | sum_s (sum_l sqrt(cnl_k cnl_i eps_k eps_i)) hbar_k^H hbar_i |^2 with
    # both path-loss factors on the same surface
    u4 = np.einsum("ls,ls->s",
                   np.sqrt(cnl[:, :, k] * eps[None, :, k]),
                   np.sqrt(cnl[:, :, i] * eps[None, :, i]))
    Y = np.einsum("s,s->", u4, HH[:, k, i])
    return float((Y * np.conj(Y)).real) * R_weight


def nlos_terms(stats: ChannelStatistics, hwi: HwiProfile, config: SystemConfig,
               powers):
    """Per-user (signal, interference, hwi, noise) for NLoS-only surface-AP
    links; no term depends on the phase shifts."""
    L, S, K = stats.dims
    B, R = config.B, config.R
    snc = sinc_moment(hwi.kappa_r)
    s2 = snc * snc
    al, be, gam, eps = stats.alpha, stats.beta, stats.gamma, stats.eps
    cnl = be[:, :, None] * al[None, :, :] / (eps[None, :, :] + 1.0)
    ba = be[:, :, None] * al[None, :, :]
    hbar = _hbar_table(stats, config)
    HH = np.einsum("skr,sir->ski", hbar.conj(), hbar)

    noise = ba.sum(axis=(0, 1)) * B * R + gam.sum(axis=0) * B

    signal = np.empty(K)
    for k in range(K):
        bak = ba[:, :, k]
        val = bak.sum() ** 2 * B**2 * R**2 * s2
        val += np.einsum("ls,lz->", bak, bak) * B * R**2
        for s in range(S):
            val += B**2 * R * (
                2.0 * (be[:, s] * al[s, k]).sum() * gam[:, k].sum() * snc
                + cnl[:, s, k].sum() ** 2 * (2.0 * eps[s, k] + 1.0)
                + be[:, s].sum() ** 2 * al[s, k] ** 2 * (1.0 - s2)
            )
        val += B * R * np.sum(
            2.0 * bak * gam[:, k:k + 1]
            + cnl[:, :, k] ** 2 * (2.0 * eps[None, :, k] + 1.0)
        )
        val += (gam[:, k].sum() * B) ** 2 + (gam[:, k] ** 2).sum() * B
        signal[k] = val

    interference = np.zeros((K, K))
    for k in range(K):
        for i in range(K):
            if i == k:
                continue
            val = B**2 * s2 * _u4_hh_quartic(cnl, eps, HH, k, i)
            for s in range(S):
                w = np.sqrt(cnl[:, s, k] * cnl[:, s, i]).sum()
                val += w**2 * B**2 * R * (
                    eps[s, k] * (1.0 + eps[s, i] * (1.0 - s2)) + eps[s, i] + 1.0
                )
            val += B * R**2 * np.einsum("ls,lz->", ba[:, :, k], ba[:, :, i])
            val += B * R * np.sum(be * (al[None, :, k] * gam[:, None, i]
                                        + al[None, :, i] * gam[:, None, k]))
            val += B * np.sum(gam[:, k] * gam[:, i])
            interference[k, i] = val

    ku2, kb2 = hwi.kappa_u**2, hwi.kappa_b**2
    hwi_term = ku2 * (powers * signal + interference @ powers)
    t1 = ba.sum(axis=1) * B * R + gam * B                      # (L, K)
    t2 = gam + ba.sum(axis=1) * R
    hwi_term = hwi_term + kb2 * (1.0 + ku2) * np.einsum("lk,li,i->k", t1, t2, powers)
    return signal, interference, hwi_term, noise


def sinr_nlos(stats: ChannelStatistics, hwi: HwiProfile, config: SystemConfig,
              powers=None, k=0):
    """NLoS-only (surface-AP) SINR of user k."""
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    signal, interference, hwi_term, noise = nlos_terms(stats, hwi, config, powers)
    denom = interference[k] @ powers + hwi_term[k] + config.sigma2 * noise[k]
    return float(powers[k] * signal[k] / denom)


def sinr_limit(case, stats: ChannelStatistics, hwi: HwiProfile,
               config: SystemConfig, p, theta=None):
    """Per-user asymptotic SINR for the printed large-array limits.

    NL_B / NL_R / NL_BR assume NLoS surface-AP links with power scaled as
    p/B, p/R, p/(B*R); OL_B is the pure-LoS p/B limit and needs theta.
    """
    if case not in CASES:
        raise ValueError(f"unknown limit case {case!r}")
    L, S, K = stats.dims
    B, R = config.B, config.R
    snc = sinc_moment(hwi.kappa_r)
    s2 = snc * snc
    al, be, gam, eps = stats.alpha, stats.beta, stats.gamma, stats.eps
    ku2, kb2 = hwi.kappa_u**2, hwi.kappa_b**2
    ba = be[:, :, None] * al[None, :, :]

    if case == "NL_BR":
        noise = ba.sum(axis=(0, 1))
        signal = ba.sum(axis=(0, 1)) ** 2 * s2
        return p * signal / (ku2 * p * signal + config.sigma2 * noise)

    if case == "NL_R":
        noise = ba.sum(axis=(0, 1)) * B
        cross = np.einsum("lsk,lzi->ki", ba, ba) * B            # full, incl. i == k
        signal = ba.sum(axis=(0, 1)) ** 2 * B**2 * s2 + np.diag(cross)
        interference = cross.copy()
        np.fill_diagonal(interference, 0.0)
        hwi_term = ku2 * p * (signal + interference.sum(axis=1)) \
            + kb2 * (1.0 + ku2) * p * cross.sum(axis=1)
        return p * signal / (p * interference.sum(axis=1) + hwi_term
                             + config.sigma2 * noise)

    if case == "NL_B":
        cnl = ba / (eps[None, :, :] + 1.0)
        hbar = _hbar_table(stats, config)
        HH = np.einsum("skr,sir->ski", hbar.conj(), hbar)
        noise = ba.sum(axis=(0, 1)) * R + gam.sum(axis=0)
        signal = np.empty(K)
        for k in range(K):
            val = ba[:, :, k].sum() ** 2 * R**2 * s2
            for s in range(S):
                val += R * (
                    2.0 * (be[:, s] * al[s, k]).sum() * gam[:, k].sum() * snc
                    + cnl[:, s, k].sum() ** 2 * (2.0 * eps[s, k] + 1.0)
                    + be[:, s].sum() ** 2 * al[s, k] ** 2 * (1.0 - s2)
                )
            signal[k] = val + gam[:, k].sum() ** 2
        interference = np.zeros((K, K))
        for k in range(K):
            for i in range(K):
                if i == k:
                    continue
                val = s2 * _u4_hh_quartic(cnl, eps, HH, k, i)
                for s in range(S):
                    w = np.sqrt(cnl[:, s, k] * cnl[:, s, i]).sum()
                    val += w**2 * R * (eps[s, k] * (1.0 + eps[s, i] * (1.0 - s2))
                                       + eps[s, i] + 1.0)
                interference[k, i] = val
        hwi_term = ku2 * p * (signal + interference.sum(axis=1))
        return p * signal / (p * interference.sum(axis=1) + hwi_term
                             + config.sigma2 * noise)

    # OL_B: pure-LoS cascaded links, needs the phase configuration
    if theta is None:
        raise ValueError("the OL_B limit needs a phase vector")
    F, ar_cross = _f_table(stats, config, theta)
    F2 = (F.conj() * F).real
    noise = np.einsum("lsk,lsk->k", ba, F2) + gam.sum(axis=0)
    signal = np.empty(K)
    interference = np.zeros((K, K))
    for k in range(K):
        q = np.einsum("ls,ls->", ba[:, :, k], F2[:, :, k])
        val = s2 * q**2
        val += 2.0 * snc * q * gam[:, k].sum()
        val += (1.0 - s2) * np.einsum(
            "ls,ms,s,slm->",
            be * F[:, :, k].conj(), be * F[:, :, k], al[:, k] ** 2, ar_cross
        ).real
        signal[k] = val
        for i in range(K):
            if i == k:
                continue
            z = np.einsum("s,ls,ls->", np.sqrt(al[:, k] * al[:, i]),
                          be * F[:, :, k].conj(), F[:, :, i])
            interference[k, i] = s2 * float((z * np.conj(z)).real)
            interference[k, i] += (1.0 - s2) * np.einsum(
                "ls,ms,s,slm->",
                be * F[:, :, k].conj(), be * F[:, :, k],
                al[:, k] * al[:, i], ar_cross
            ).real
    hwi_term = ku2 * p * (signal + interference.sum(axis=1))
    return p * signal / (p * interference.sum(axis=1) + hwi_term
                         + config.sigma2 * noise)


def convergence_probe(scaling: ScalingMode, case, grid, stats, hwi,
                      config: SystemConfig, theta=None):
    """General-formula SINR along a (B, R) grid against the matching limit.

    Returns one row per grid point: dims, effective power, per-user general
    and limit SINRs, and the relative gap (None when case == "none").
    """
    from . import channel, closedform

    rows = []
    for B, R in grid:
        cfg = SystemConfig(L=config.L, S=config.S, K=config.K, B=B, R=R,
                           d_over_lambda=config.d_over_lambda, p=config.p,
                           sigma2=config.sigma2, mu=config.mu)
        p_eff = scaling.effective_power(B, R)
        powers = np.full(cfg.K, p_eff)
        los = channel.build_los(stats, cfg)
        th = np.zeros(stats.dims[1] * R) if theta is None else theta
        breakdown = closedform.rate(th, stats, los, hwi, cfg, powers)
        if case == "none":
            limit = gap = None
        else:
            limit = sinr_limit(case, stats, hwi, cfg, scaling.p, theta=th)
            gap = np.abs(breakdown.sinr - limit) / np.abs(limit)
        rows.append({
            "B": B, "R": R, "p_eff": p_eff,
            "sinr_general": breakdown.sinr, "sinr_limit": limit, "rel_gap": gap,
        })
    return rows
