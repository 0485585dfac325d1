"""Deterministic LoS structure (planar-array steering vectors) and random
small-scale channel / phase-noise draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelStatistics, HwiProfile, SystemConfig


class InvalidDimension(ValueError):
    """Array size is not a perfect square (planar array needs one)."""


def array_response(X, azimuth, elevation, d_over_lambda):
    """Steering vector of a square planar array with X elements.

    Element x (1-based) has phase
        2*pi*(d/lambda) * ( floor((x-1)/sqrt(X)) * sin(el)*sin(az)
                            + ((x-1) mod sqrt(X)) * cos(el) ).
    Storage is 0-based; idx = x - 1 below.
    """
    root = math.isqrt(int(X))
    if root * root != int(X):
        raise InvalidDimension(f"array size {X} is not a perfect square")
    idx = np.arange(int(X))
    phase = 2.0 * np.pi * d_over_lambda * (
        (idx // root) * (np.sin(elevation) * np.sin(azimuth))
        + (idx % root) * np.cos(elevation)
    )
    return np.exp(1j * phase)


def sinc_moment(kappa_r):
    """Mean of exp(j*noise) for phase noise uniform on [-kappa_r*pi, kappa_r*pi]:
    sin(kappa_r*pi)/(kappa_r*pi), continuously extended to 1 at kappa_r=0.
    """
    return float(np.sinc(kappa_r))


@dataclass
class LosStructure:
    """Deterministic LoS pieces for every link, plus the inner-product tables
    the closed-form engine reuses.
    """

    a_R: np.ndarray       # (S, K, R) RIS steering toward each user
    a_B: np.ndarray       # (L, S, B) AP steering toward each surface
    a_R_dep: np.ndarray   # (L, S, R) RIS steering toward each AP
    zbar: np.ndarray = field(init=False)      # (L, S, B, R) rank-1 LoS matrices
    ab_cross: np.ndarray = field(init=False)  # (L, S, S)  a_B(l,s1)^H a_B(l,s2)
    ar_cross: np.ndarray = field(init=False)  # (S, L, L)  a_R_dep(l1,s)^H a_R_dep(l2,s)
    hh_cross: np.ndarray = field(init=False)  # (S, K, K)  a_R(s,k)^H a_R(s,i)

    def __post_init__(self):
        self.zbar = np.einsum("lsb,lsr->lsbr", self.a_B, self.a_R_dep.conj())
        self.ab_cross = np.einsum("lsb,lzb->lsz", self.a_B.conj(), self.a_B)
        self.ar_cross = np.einsum("lsr,msr->slm", self.a_R_dep.conj(), self.a_R_dep)
        self.hh_cross = np.einsum("skr,sir->ski", self.a_R.conj(), self.a_R)


def build_los(stats: ChannelStatistics, config: SystemConfig) -> LosStructure:
    L, S, K = stats.dims
    B, R, dl = config.B, config.R, config.d_over_lambda
    a_R = np.empty((S, K, R), dtype=complex)
    for s in range(S):
        for k in range(K):
            az, el = stats.aoa_ris[s, k]
            a_R[s, k] = array_response(R, az, el, dl)
    a_B = np.empty((L, S, B), dtype=complex)
    a_R_dep = np.empty((L, S, R), dtype=complex)
    for l in range(L):
        for s in range(S):
            az, el = stats.aoa_ap[l, s]
            a_B[l, s] = array_response(B, az, el, dl)
            az, el = stats.aod_ris[l, s]
            a_R_dep[l, s] = array_response(R, az, el, dl)
    return LosStructure(a_R=a_R, a_B=a_B, a_R_dep=a_R_dep)


@dataclass
class ChannelRealization:
    """One draw of every fast-fading quantity."""

    h_tilde: np.ndarray      # (S, K, R) scattered user-RIS part, CN(0,1) entries
    z_tilde: np.ndarray      # (L, S, B, R) scattered RIS-AP part
    d: np.ndarray            # (L, K, B) direct link, already scaled by sqrt(gamma)
    theta_noise: np.ndarray  # (S, R) per-element phase errors


def _cn(rng, shape):
    # unit-variance circular complex Gaussian
    return math.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_realization(stats: ChannelStatistics, los: LosStructure,
                       hwi: HwiProfile, config: SystemConfig, rng) -> ChannelRealization:
    L, S, K = stats.dims
    B, R = config.B, config.R
    h_tilde = _cn(rng, (S, K, R))
    z_tilde = _cn(rng, (L, S, B, R))
    d = np.sqrt(stats.gamma)[:, :, None] * _cn(rng, (L, K, B))
    bound = hwi.kappa_r * np.pi
    theta_noise = rng.uniform(-bound, bound, size=(S, R))
    return ChannelRealization(h_tilde=h_tilde, z_tilde=z_tilde, d=d, theta_noise=theta_noise)


def rician_mix(stats: ChannelStatistics):
    """LoS/NLoS mixing weights (lo_h, nlo_h, lo_z, nlo_z); the pure-LoS limit
    pins them to (1, 0, 1, 0).
    """
    if stats.pure_los:
        return (np.ones(stats.alpha.shape), np.zeros(stats.alpha.shape),
                np.ones(stats.beta.shape), np.zeros(stats.beta.shape))
    lo_h = np.sqrt(stats.eps / (stats.eps + 1.0))
    nlo_h = np.sqrt(1.0 / (stats.eps + 1.0))
    lo_z = np.sqrt(stats.delta / (stats.delta + 1.0))
    nlo_z = np.sqrt(1.0 / (stats.delta + 1.0))
    return lo_h, nlo_h, lo_z, nlo_z


def aggregate_channel(stats: ChannelStatistics, los: LosStructure,
                      real: ChannelRealization, theta, with_phase_noise: bool):
    """Per-(AP, user) aggregated channel vectors, shape (L, K, B).

    theta is the flat (S*R,) phase vector; with_phase_noise applies the
    realization's per-element phase errors on top of it (received channel),
    without it gives the combiner-side channel.
    """
    L, S, K = stats.dims
    R = los.a_R_dep.shape[2]
    lo_h, nlo_h, lo_z, nlo_z = rician_mix(stats)
    h = np.sqrt(stats.alpha)[:, :, None] * (lo_h[:, :, None] * los.a_R
                                            + nlo_h[:, :, None] * real.h_tilde)
    z = np.sqrt(stats.beta)[:, :, None, None] * (
        lo_z[:, :, None, None] * los.zbar + nlo_z[:, :, None, None] * real.z_tilde
    )
    theta = np.asarray(theta, dtype=float).reshape(S, R)
    phase = theta + (real.theta_noise if with_phase_noise else 0.0)
    phi = np.exp(1j * phase)                       # (S, R)
    h_shifted = phi[:, None, :] * h                # (S, K, R)
    return np.einsum("lsbr,skr->lkb", z, h_shifted) + real.d


def random_phases(rng, S, R):
    """Uniform [0, 2*pi) flat phase vector of length S*R."""
    return rng.uniform(0.0, 2.0 * np.pi, size=S * R)
