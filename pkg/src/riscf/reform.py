"""Tractable matrix form of the rate: the per-surface phase factors are
absorbed into one big diagonal, so every theta-dependent term becomes a
quadratic or quartic form in Phi = diag(exp(j theta)) built from stacked
weighted LoS matrices.  This is the representation the optimizer
differentiates; equality with the per-index closed form is enforced by tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import LosStructure, sinc_moment
from .scenario import ChannelStatistics, HwiProfile, SystemConfig, link_weights


@dataclass
class StackedStatistics:
    """Stacked (L*B x S*R) weighted LoS matrices and the diagonal weight
    tables.  u-tables are per-element diagonals (length S*R); v-tables are
    per-AP block values (length L) of block-diagonal (L*B x L*B) matrices.
    """

    L: int
    S: int
    K: int
    B: int
    R: int
    zbar1: np.ndarray            # (LB, SR) sqrt(beta*delta/(delta+1)) blocks
    zbar2: np.ndarray            # (K, LB, SR) sqrt(c*delta) blocks
    zbar3: np.ndarray            # (K, LB, SR) sqrt(c*delta*eps) blocks
    zbar4: np.ndarray            # (K, LB, SR) c * zbar1 blocks
    hbar1: np.ndarray            # (K, SR) sqrt(alpha*eps/(eps+1)) weighted LoS
    hbar: np.ndarray             # (K, SR) plain stacked LoS
    u1: np.ndarray               # (K, SR)  sum_l c
    u2: np.ndarray               # (K, SR)  sum_l c*delta
    u3: np.ndarray               # (K, SR)  sum_l c*eps
    u4: np.ndarray               # (K, K, SR) sum_l sqrt(c_k c_i eps_k eps_i)
    ug: np.ndarray               # (K, K, SR) sum_l sqrt(c_k eps_k) sqrt(c_i)
    v1: np.ndarray               # (K, L)  sum_s c (eps+1)
    v2: np.ndarray               # (K, L)  gamma
    v3: np.ndarray               # (K, L)  sum_s c*delta
    v4: np.ndarray               # (K, L)  sum_s c*delta*eps


def build_stacked(stats: ChannelStatistics, los: LosStructure,
                  hwi: HwiProfile, config: SystemConfig) -> StackedStatistics:
    L, S, K = stats.dims
    B, R = config.B, config.R
    w = link_weights(stats)

    def stack_z(weights):
        # weights (L, S) -> dense (LB, SR) with rank-1 blocks
        out = np.zeros((L * B, S * R), dtype=complex)
        for l in range(L):
            for s in range(S):
                out[l * B:(l + 1) * B, s * R:(s + 1) * R] = weights[l, s] * los.zbar[l, s]
        return out

    zbar1 = stack_z(w.zw1)
    zbar2 = np.stack([stack_z(w.w_cd[:, :, k]) for k in range(K)]) if K else np.zeros((0,))
    zbar3 = np.stack([stack_z(w.w_cde[:, :, k]) for k in range(K)])
    zbar4 = np.stack([stack_z(w.c[:, :, k] * w.zw1) for k in range(K)])

    hbar = np.stack([los.a_R[:, k, :].reshape(S * R) for k in range(K)]) \
        if S else np.zeros((K, 0), dtype=complex)
    hbar1 = np.stack([
        (w.hw1[:, k, None] * los.a_R[:, k, :]).reshape(S * R) for k in range(K)
    ]) if S else np.zeros((K, 0), dtype=complex)

    def per_element(table):     # (L, S, K) -> (K, SR) via sum over l, repeat R
        return np.repeat(table.sum(axis=0).T, R, axis=1)

    u1 = per_element(w.c)
    u2 = per_element(w.m_cd)
    u3 = per_element(w.m_ce)
    u4 = np.repeat(
        np.einsum("lsk,lsi->kis", w.w_ce, w.w_ce), R, axis=2
    ) if S else np.zeros((K, K, 0))
    ug = np.repeat(
        np.einsum("lsk,lsi->kis", w.w_ce, w.w_c), R, axis=2
    ) if S else np.zeros((K, K, 0))

    v1 = np.einsum("lsk->kl", w.m_ce + w.c)
    v2 = stats.gamma.T.copy()
    v3 = np.einsum("lsk->kl", w.m_cd)
    v4 = np.einsum("lsk->kl", w.m_cde)
    return StackedStatistics(
        L=L, S=S, K=K, B=B, R=R,
        zbar1=zbar1, zbar2=zbar2, zbar3=zbar3, zbar4=zbar4,
        hbar1=hbar1, hbar=hbar,
        u1=u1, u2=u2, u3=u3, u4=u4, ug=ug, v1=v1, v2=v2, v3=v3, v4=v4,
    )


@dataclass
class TractableTerms:
    """theta-independent constants plus every cached matrix the evaluators and
    gradients need."""

    stacked: StackedStatistics
    sinc: float
    s2: float
    kappa_u: float
    kappa_b: float
    signal1: np.ndarray          # (K,)
    interference1: np.ndarray    # (K, K)
    noise_const: np.ndarray      # (K,)
    hwi_const: np.ndarray        # (K, K), contracted with powers at eval time
    b_coef: np.ndarray           # (K,) linear-in-quad signal coefficient
    d_vec: np.ndarray            # (K, SR) diag 2*u1 + (u2+u3)(1-sinc^2)
    G: np.ndarray                # (SR, SR) zbar1^H zbar1
    m21: np.ndarray              # (K, SR, SR) zbar1^H zbar2_i
    m31: np.ndarray              # (K, SR, SR) zbar1^H zbar3_i
    m23: np.ndarray              # (K, K, SR, SR) zbar2_k^H zbar3_i
    msig: np.ndarray             # (K, SR, SR) signal quadratic kernel
    me: np.ndarray               # (K, SR, SR) signal constant-diag kernel
    mt4: np.ndarray              # (K, SR, SR) interference kernel (index i)
    mt5: np.ndarray              # (K, SR, SR) interference kernel (index k)
    mh1: np.ndarray              # (K, SR, SR) distortion kernel (index i)
    mh2: np.ndarray              # (K, SR, SR) distortion kernel (index k)


def _chain4(Q2a, Q2b, mid_a, mid_b, AB, AR):
    # sum over l1(l), l2(m), s1(s), s2(z) of the two-hop LoS loop
    return np.einsum("ls,ms,lz,mz,lsz,zlm,mzs,sml->",
                     Q2a, Q2b, mid_a, mid_b, AB, AR, AB, AR)


def _constants(stats, los, hwi, config):
    L, S, K = stats.dims
    B, R = config.B, config.R
    w = link_weights(stats)
    sinc = sinc_moment(hwi.kappa_r)
    s2 = sinc * sinc
    AB, AR, HH = los.ab_cross, los.ar_cross, los.hh_cross
    gam = stats.gamma
    gam_sum = gam.sum(axis=0)
    m1, m2, m3, c = w.m_cde, w.m_cd, w.m_ce, w.c
    W, Q2 = w.w_cde, w.w_cd

    noise_const = B * R * np.einsum("lsk->k", m2 + m3 + c) + B * gam_sum

    signal1 = np.zeros(K)
    interference1 = np.zeros((K, K))
    for k in range(K):
        Q2k, Wk = Q2[:, :, k], W[:, :, k]
        val = _chain4(Q2k, Q2k, Q2k, Q2k, AB, AR).real
        val += (1.0 - s2) * _chain4(Q2k, Q2k, Wk, Wk, AB, AR).real
        tot = (m2 + m3 + c)[:, :, k].sum()
        val += B**2 * R**2 * s2 * tot**2
        sm2 = m2[:, :, k].sum(axis=0)
        sm3 = m3[:, :, k].sum(axis=0)
        sc = c[:, :, k].sum(axis=0)
        val += B**2 * R * np.sum(
            (1.0 - s2) * (4.0 * sm2 * sm3 + sm2**2 + sm3**2)
            + (2.0 - s2) * (2.0 * sm2 + 2.0 * sm3 + sc) * sc
            + 2.0 * sinc * (sm2 + sm3 + sc) * gam_sum[k]
        )
        # LoS cascade piece carries (1 - sinc^2) with unit weight
        sA = ((1.0 - s2) * m1 + 2.0 * m2 + m3 + c)[:, :, k].sum(axis=1)
        sB = (m3 + c)[:, :, k].sum(axis=1)
        val += B * R**2 * np.sum(sA * sB)
        g = gam[:, k:k + 1]
        val += B * R * np.sum(
            (1.0 - s2) * m1[:, :, k] * (2.0 * c[:, :, k] + g)
            + 2.0 * (m2 + m3)[:, :, k] * (c[:, :, k] + g)
            + c[:, :, k] * (c[:, :, k] + 2.0 * g)
        )
        val += (B * gam_sum[k])**2 + B * np.sum(gam[:, k]**2)
        signal1[k] = val

    E, RC = w.w_ce, w.w_c
    for k in range(K):
        for i in range(K):
            if i == k:
                continue
            Q2k, Wk = Q2[:, :, k], W[:, :, k]
            Q2i, Wi = Q2[:, :, i], W[:, :, i]
            Ek, Ei = E[:, :, k], E[:, :, i]
            RCk, RCi = RC[:, :, k], RC[:, :, i]
            val = _chain4(Q2k, Q2k, Q2i, Q2i, AB, AR).real
            val += (1.0 - s2) * _chain4(Q2k, Q2k, Wi, Wi, AB, AR).real
            # squared cross-user LoS mean; both c-factors share the surface
            u4 = np.einsum("ls,ls->s", Ek, Ei)
            Y = np.einsum("s,s->", u4, HH[:, k, i])
            val += B**2 * s2 * float((Y * np.conj(Y)).real)
            pair_tables = (
                (2.0, Q2k * Q2i, RCi * RCk),
                (2.0 * (1.0 - s2), Q2k * Wi, Ei * RCk),
                (1.0, Ek * RCi, Ek * RCi),
                (1.0 - s2, Ek * Ei, Ek * Ei),
                (1.0, RCk * Ei, RCk * Ei),
                (1.0, RCk * RCi, RCk * RCi),
            )
            val += B**2 * R * sum(
                coef * np.sum(t1.sum(axis=0) * t2.sum(axis=0))
                for coef, t1, t2 in pair_tables
            )
            k_eps = (m3 + c)[:, :, k].sum(axis=1)
            k_all = (m2 + m3 + c)[:, :, k].sum(axis=1)
            i_eps = (m3 + c)[:, :, i].sum(axis=1)
            i_del = (m2 + (1.0 - s2) * m1)[:, :, i].sum(axis=1)
            val += B * R**2 * np.sum(k_eps * i_del + k_all * i_eps)
            val += B * R * np.sum(
                (m2 + m3 + c)[:, :, k] * gam[:, None, i]
                + (m2 + (1.0 - s2) * m1 + m3 + c)[:, :, i] * gam[:, None, k]
            )
            val += B * np.sum(gam[:, k] * gam[:, i])
            interference1[k, i] = val

    t1_fixed = gam * B + B * R * np.einsum("lsk->lk", m2 + m3 + c)     # (L, K)
    t2_fixed = gam + R * np.einsum("lsk->lk", m2 + (1.0 - s2) * m1 + m3 + c)
    hwi_const = np.einsum("lk,li->ki", t1_fixed, t2_fixed)

    b_coef = 2.0 * B * (gam_sum * sinc
                        + s2 * R * np.einsum("lsk->k", m2 + m3 + c))
    return noise_const, signal1, interference1, hwi_const, b_coef, sinc, s2


def build_terms(stats: ChannelStatistics, los: LosStructure,
                hwi: HwiProfile, config: SystemConfig,
                stacked: StackedStatistics | None = None) -> TractableTerms:
    if stacked is None:
        stacked = build_stacked(stats, los, hwi, config)
    st = stacked
    K, L, B, R = st.K, st.L, st.B, st.R
    noise_const, signal1, interference1, hwi_const, b_coef, sinc, s2 = _constants(
        stats, los, hwi, config
    )
    SR = st.zbar1.shape[1]
    G = st.zbar1.conj().T @ st.zbar1

    def v_sandwich(vals):
        # zbar1^H diag(per-AP vals) zbar1
        rows = np.repeat(vals, B)
        return st.zbar1.conj().T @ (rows[:, None] * st.zbar1)

    m21 = np.empty((K, SR, SR), dtype=complex)
    m31 = np.empty((K, SR, SR), dtype=complex)
    m22 = np.empty((K, SR, SR), dtype=complex)
    m33 = np.empty((K, SR, SR), dtype=complex)
    c4 = np.empty((K, SR, SR), dtype=complex)
    gv = {}
    for k in range(K):
        a2 = st.zbar2[k].conj().T @ st.zbar1
        a3 = st.zbar3[k].conj().T @ st.zbar1
        m21[k] = a2.conj().T
        m31[k] = a3.conj().T
        m22[k] = a2.conj().T @ a2
        m33[k] = a3.conj().T @ a3
        c4[k] = st.zbar4[k].conj().T @ st.zbar1 + st.zbar1.conj().T @ st.zbar4[k]
        gv[k] = tuple(v_sandwich(v[k]) for v in (st.v1, st.v2, st.v3, st.v4))

    msig = np.stack([(1.0 + s2) * m22[k] + (1.0 - s2) * m33[k] for k in range(K)])
    me = np.stack([(1.0 + s2) * (c4[k] + gv[k][1] + R * gv[k][0]) for k in range(K)])
    mt4 = np.stack([R * gv[i][0] + gv[i][1] + m22[i] + (1.0 - s2) * m33[i]
                    for i in range(K)])
    mt5 = np.stack([R * gv[k][0] + gv[k][1] + m22[k] for k in range(K)])
    mh1 = np.stack([gv[i][1] + R * (gv[i][0] + gv[i][2] + (1.0 - s2) * gv[i][3])
                    for i in range(K)])
    mh2 = np.stack([gv[k][1] + R * (gv[k][0] + gv[k][2]) for k in range(K)])
    m23 = np.empty((K, K, SR, SR), dtype=complex)
    for k in range(K):
        for i in range(K):
            m23[k, i] = st.zbar2[k].conj().T @ st.zbar3[i]

    d_vec = 2.0 * st.u1 + (st.u2 + st.u3) * (1.0 - s2)
    return TractableTerms(
        stacked=st, sinc=sinc, s2=s2, kappa_u=hwi.kappa_u, kappa_b=hwi.kappa_b,
        signal1=signal1, interference1=interference1, noise_const=noise_const,
        hwi_const=hwi_const, b_coef=b_coef, d_vec=d_vec,
        G=G, m21=m21, m31=m31, m23=m23,
        msig=msig, me=me, mt4=mt4, mt5=mt5, mh1=mh1, mh2=mh2,
    )


def prepare(stats, los, hwi, config):
    stacked = build_stacked(stats, los, hwi, config)
    return stacked, build_terms(stats, los, hwi, config, stacked)


class ThetaWorkspace:
    """Per-theta shared products: w_k = Phi hbar1_k, G w_k, zbar1 w_k."""

    def __init__(self, tt: TractableTerms, theta):
        st = tt.stacked
        self.v = np.exp(1j * np.asarray(theta, dtype=float).reshape(-1))
        if self.v.size != st.S * st.R:
            raise ValueError("theta must have length S*R")
        self.w = self.v[None, :] * st.hbar1                  # (K, SR)
        self.gw = self.w @ tt.G.T                            # (K, SR), G w_k rows
        self.zw = self.w @ st.zbar1.T                        # (K, LB)
        self.quad = np.einsum("ks,ks->k", self.w.conj(), self.gw).real


def _pair_value(tt, ws, k, i):
    st = tt.stacked
    s2, B, R = tt.s2, st.B, st.R
    w_k, w_i = ws.w[k], ws.w[i]
    z = np.vdot(w_k, ws.gw[i])                               # w_k^H G w_i
    out = s2 * (z * np.conj(z)) + 0j
    scal = np.vdot(st.hbar[i], tt.stacked.u4[k, i] * st.hbar[k])
    out += 2.0 * B * s2 * (z * scal).real
    # cross-user mixed-weight quadratics (tractable form of the shared-AP
    # beam couplings; the plain U-diag sandwich cannot carry these weights)
    a_g1 = tt.stacked.ug[k, i] * st.hbar[k]
    out += 2.0 * B * np.vdot(w_k, tt.m21[i] @ (ws.v * a_g1)).real
    a_u4 = tt.stacked.u4[k, i] * st.hbar[k]
    out += 2.0 * B * (1.0 - s2) * np.vdot(w_k, tt.m31[i] @ (ws.v * a_u4)).real
    a_g2 = tt.stacked.ug[i, k] * st.hbar[i]
    out += 2.0 * B * s2 * np.vdot(ws.v * a_g2, tt.m23[k, i] @ (ws.v * st.hbar[i])).real
    out += np.vdot(w_k, tt.mt4[i] @ w_k)
    out += s2 * np.vdot(w_i, tt.mt5[k] @ w_i)
    return out.real


def terms_reform(theta, stacked: StackedStatistics, terms: TractableTerms,
                 config: SystemConfig, powers=None):
    """(signal, interference, hwi, noise) per user from the matrix form."""
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    return terms_from_workspace(terms, ThetaWorkspace(terms, theta), powers)


def terms_from_workspace(terms: TractableTerms, ws: "ThetaWorkspace", powers):
    tt = terms
    st = tt.stacked
    K, B, R = st.K, st.B, st.R
    s2 = tt.s2
    powers = np.asarray(powers, dtype=float)

    noise = ws.quad + tt.noise_const

    signal = np.empty(K)
    for k in range(K):
        w_k = ws.w[k]
        val = s2 * ws.quad[k] ** 2 + tt.b_coef[k] * ws.quad[k]
        val += np.vdot(w_k, tt.msig[k] @ w_k).real
        val += 2.0 * B * np.vdot(w_k, tt.G @ (ws.v * (tt.d_vec[k] * st.hbar1[k]))).real
        val += np.vdot(w_k, tt.me[k] @ w_k).real
        signal[k] = tt.signal1[k] + val

    interference = np.zeros((K, K))
    for k in range(K):
        for i in range(K):
            if i != k:
                interference[k, i] = tt.interference1[k, i] + _pair_value(tt, ws, k, i)

    ku2, kb2 = tt.kappa_u**2, tt.kappa_b**2
    hwi = ku2 * (powers * signal + interference @ powers)
    if kb2 > 0.0:
        zw2 = (ws.zw.conj() * ws.zw).real                     # (K, LB)
        for k in range(K):
            acc = 0.0
            for i in range(K):
                acc += powers[i] * (
                    tt.hwi_const[k, i]
                    + np.vdot(ws.w[k], tt.mh1[i] @ ws.w[k]).real
                    + s2 * (
                        np.vdot(ws.w[i], tt.mh2[k] @ ws.w[i]).real
                        + float(zw2[i] @ zw2[k])
                    )
                )
            hwi[k] += kb2 * (1.0 + ku2) * acc
    return signal, interference, hwi, noise


def rate_reform(theta, stacked, terms, config, powers=None):
    """Per-user rate (bits/s/Hz) from the tractable matrix form."""
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    signal, interference, hwi, noise = terms_reform(theta, stacked, terms, config, powers)
    denom = interference @ powers + hwi + config.sigma2 * noise
    sinr = powers * signal / denom
    return np.log2(1.0 + sinr)
