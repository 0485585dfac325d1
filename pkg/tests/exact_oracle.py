"""Exact-moment oracle for tiny instances: expands the detection products as
polynomials over the independent CN(0,1) scalars and per-element phase
factors, then evaluates expectations with the exact moment rules
E{z^p conj(z)^q} = delta_pq p!  and  E{exp(j n theta)} = sinc(n kappa_r).

Brute force (monomial count explodes with L*B*(4SR+1)); keep dims tiny.
"""

import math
from collections import defaultdict

import numpy as np

from riscf.channel import rician_mix


def monomials_q(stats, los, config, theta, k, hat):
    """Monomials of every entry q[l, b] as (coef, vars) lists; vars are
    ((name, *index), power) tuples, with 'e' marking phase-noise factors."""
    L, S, K = stats.dims
    B, R = config.B, config.R
    v = np.exp(1j * np.asarray(theta, dtype=float).reshape(S, R))
    sa = np.sqrt(stats.alpha)
    sb = np.sqrt(stats.beta)
    lo_h, nlo_h, lo_z, nlo_z = rician_mix(stats)
    out = {}
    for l in range(L):
        for b in range(B):
            terms = []
            for s in range(S):
                for r in range(R):
                    zbar = lo_z[l, s] * sb[l, s] * los.zbar[l, s, b, r]
                    hbar = lo_h[s, k] * sa[s, k] * los.a_R[s, k, r]
                    cz = nlo_z[l, s] * sb[l, s]
                    ch = nlo_h[s, k] * sa[s, k]
                    ph = v[s, r]
                    e_var = ((("e", s, r), 1),) if hat else ()
                    terms.append((zbar * hbar * ph, e_var))
                    terms.append((zbar * ch * ph, e_var + ((("h", s, k, r), 1),)))
                    terms.append((cz * hbar * ph, e_var + ((("Z", l, s, b, r), 1),)))
                    terms.append((cz * ch * ph,
                                  e_var + ((("h", s, k, r), 1),
                                           (("Z", l, s, b, r), 1))))
            terms.append((np.sqrt(stats.gamma[l, k]), ((("d", l, k, b), 1),)))
            out[(l, b)] = terms
    return out


def _bilinear(qa, qb, L, B):
    # monomials of sum_{l,b} conj(qa[l,b]) qb[l,b], keyed by exponent signature
    acc = defaultdict(complex)
    for l in range(L):
        for b in range(B):
            for ca, va in qa[(l, b)]:
                for cb, vb in qb[(l, b)]:
                    sig = defaultdict(lambda: [0, 0])
                    for var, p in va:       # conjugated factor
                        sig[var][1] += p
                    for var, p in vb:
                        sig[var][0] += p
                    key = tuple(sorted((var, tuple(pq)) for var, pq in sig.items()))
                    acc[key] += np.conj(ca) * cb
    return acc


def _expect(sig1, sig2, kappa_r):
    # E{ m1 conj(m2) } for two signatures
    tot = defaultdict(lambda: [0, 0])
    for var, (p, q) in sig1:
        tot[var][0] += p
        tot[var][1] += q
    for var, (p, q) in sig2:
        tot[var][0] += q
        tot[var][1] += p
    val = 1.0
    for var, (p, q) in tot.items():
        if var[0] == "e":
            n = p - q
            if n:
                val *= np.sinc(n * kappa_r)
                if val == 0.0:
                    return 0.0
        else:
            if p != q:
                return 0.0
            val *= math.factorial(p)
    return val


def exact_second_moment(qa, qb, L, B, kappa_r):
    """E{ |sum_{l,b} conj(qa) qb|^2 }, exact."""
    mono = list(_bilinear(qa, qb, L, B).items())
    total = 0.0 + 0.0j
    for s1, c1 in mono:
        for s2, c2 in mono:
            w = _expect(s1, s2, kappa_r)
            if w != 0.0:
                total += c1 * np.conj(c2) * w
    return float(total.real)


def exact_mean(qa, qb, L, B, kappa_r):
    """E{ sum_{l,b} conj(qa) qb }, exact."""
    total = 0.0 + 0.0j
    for sig, c in _bilinear(qa, qb, L, B).items():
        w = _expect(sig, (), kappa_r)
        if w != 0.0:
            total += c * w
    return float(total.real)


def exact_terms(stats, los, hwi, config, theta, powers):
    """Exact (signal, interference, hwi, noise) per user for tiny instances."""
    L, S, K = stats.dims
    B = config.B
    kr = hwi.kappa_r
    qs = [monomials_q(stats, los, config, theta, k, hat=False) for k in range(K)]
    qhs = [monomials_q(stats, los, config, theta, k, hat=True) for k in range(K)]
    signal = np.array([exact_second_moment(qs[k], qhs[k], L, B, kr)
                       for k in range(K)])
    interference = np.zeros((K, K))
    for k in range(K):
        for i in range(K):
            if i != k:
                interference[k, i] = exact_second_moment(qs[k], qhs[i], L, B, kr)
    noise = np.array([exact_mean(qs[k], qs[k], L, B, kr) for k in range(K)])

    ku2, kb2 = hwi.kappa_u**2, hwi.kappa_b**2
    hwi_term = np.empty(K)
    ee_q = np.array([[exact_mean({(0, 0): qs[k][(l, b)]},
                                 {(0, 0): qs[k][(l, b)]}, 1, 1, kr)
                      for l in range(L) for b in range(B)] for k in range(K)])
    ee_qh = np.array([[exact_mean({(0, 0): qhs[i][(l, b)]},
                                  {(0, 0): qhs[i][(l, b)]}, 1, 1, kr)
                       for l in range(L) for b in range(B)] for i in range(K)])
    for k in range(K):
        tx = ku2 * (powers[k] * signal[k]
                    + sum(powers[i] * interference[k, i]
                          for i in range(K) if i != k))
        rx = sum(powers[i] * float(ee_q[k] @ ee_qh[i]) for i in range(K))
        hwi_term[k] = tx + kb2 * (1.0 + ku2) * rx
    return signal, interference, hwi_term, noise
