"""Scenario construction: dimensions, hardware profiles, node geometry and the
large-scale channel statistics (path losses, Rician factors, fixed angles)
that every other module consumes.

All powers are stored internally in watts; dBm appears only at the config
file / CLI boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np


class DegenerateGeometry(ValueError):
    """Two nodes of a topology are colocated (zero link distance)."""


def dbm_to_watts(x_dbm):
    """Convert dBm to watts: 10^((x - 30) / 10)."""
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x_w):
    return 10.0 * np.log10(np.asarray(x_w, dtype=float)) + 30.0


def _isqrt_exact(n, name):
    root = math.isqrt(int(n))
    if root * root != int(n):
        raise ValueError(f"{name} must be a perfect square, got {n}")
    return root


@dataclass
class SystemConfig:
    """Static system dimensions and powers (watts)."""

    L: int                      # access points
    S: int                      # reflecting surfaces
    K: int                      # single-antenna users
    B: int                      # antennas per AP (perfect square)
    R: int                      # elements per surface (perfect square)
    d_over_lambda: float = 0.5  # element spacing / carrier wavelength
    p: float = 1.0              # per-user transmit power, watts
    sigma2: float = 1.0         # noise power, watts
    mu: float = 100.0           # max-min smoothing constant

    def __post_init__(self):
        if min(self.L, self.K, self.B, self.R) < 1 or self.S < 0:
            raise ValueError("dimensions must satisfy L,K,B,R >= 1 and S >= 0")
        _isqrt_exact(self.B, "B")
        _isqrt_exact(self.R, "R")
        if self.p <= 0 or self.sigma2 <= 0 or self.mu <= 0 or self.d_over_lambda <= 0:
            raise ValueError("p, sigma2, mu, d_over_lambda must be positive")

    def powers(self, p=None):
        """Per-user transmit power vector (watts)."""
        return np.full(self.K, self.p if p is None else p, dtype=float)


@dataclass
class HwiProfile:
    """Transceiver error-vector magnitudes and the surface quantization noise.

    quant_bits=None models ideal (infinite-precision) phase shifters,
    i.e. kappa_r = 0; otherwise kappa_r = 1 / 2**quant_bits.
    """

    kappa_u: float = 0.0        # transmitter EVM
    kappa_b: float = 0.0        # receiver EVM
    quant_bits: int | None = None

    def __post_init__(self):
        if self.kappa_u < 0 or self.kappa_b < 0:
            raise ValueError("EVMs must be nonnegative")
        if self.quant_bits is not None and int(self.quant_bits) < 0:
            raise ValueError("quant_bits must be >= 0 or None")

    @property
    def kappa_r(self):
        if self.quant_bits is None:
            return 0.0
        return 1.0 / 2 ** int(self.quant_bits)

    @property
    def ideal(self):
        return self.kappa_u == 0 and self.kappa_b == 0 and self.kappa_r == 0


@dataclass
class Topology:
    """Node coordinates (meters) and the path-loss law."""

    ap_positions: np.ndarray     # (L, dim)
    ris_positions: np.ndarray    # (S, dim)
    user_positions: np.ndarray   # (K, dim)
    pathloss_exponents: tuple = (2.0, 2.5, 4.0)   # (user-RIS, RIS-AP, user-AP)
    pathloss_scale: float = 1e-3

    def __post_init__(self):
        self.ap_positions = np.atleast_2d(np.asarray(self.ap_positions, dtype=float))
        self.ris_positions = np.asarray(self.ris_positions, dtype=float).reshape(
            -1, self.ap_positions.shape[1]
        )
        self.user_positions = np.atleast_2d(np.asarray(self.user_positions, dtype=float))
        if any(e <= 0 for e in self.pathloss_exponents):
            raise ValueError("path-loss exponents must be positive")
        for d in (
            self.dist_user_ris().ravel(),
            self.dist_ris_ap().ravel(),
            self.dist_user_ap().ravel(),
        ):
            if d.size and d.min() <= 0.0:
                raise DegenerateGeometry("colocated nodes give a zero link distance")

    def _dist(self, a, b):
        # (n, dim) x (m, dim) -> (n, m)
        return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)

    def dist_user_ris(self):
        return self._dist(self.ris_positions, self.user_positions)   # (S, K)

    def dist_ris_ap(self):
        return self._dist(self.ap_positions, self.ris_positions)     # (L, S)

    def dist_user_ap(self):
        return self._dist(self.ap_positions, self.user_positions)    # (L, K)


@dataclass
class ChannelStatistics:
    """Slow-timescale statistics: per-link path losses, Rician factors and the
    angles fixed at scenario creation.

    pure_los=True marks the limit where every surface-side link is LoS only
    (both Rician factors -> infinity); the per-link mixing weights are then
    taken at their limit values instead of from delta/eps.
    """

    alpha: np.ndarray            # (S, K) user-RIS path loss
    beta: np.ndarray             # (L, S) RIS-AP path loss
    gamma: np.ndarray            # (L, K) user-AP path loss
    delta: np.ndarray            # (L, S) RIS-AP Rician factor
    eps: np.ndarray              # (S, K) user-RIS Rician factor
    aoa_ris: np.ndarray          # (S, K, 2) (azimuth, elevation) at RIS from user
    aoa_ap: np.ndarray           # (L, S, 2) (azimuth, elevation) at AP from RIS
    aod_ris: np.ndarray          # (L, S, 2) (azimuth, elevation) from RIS to AP
    pure_los: bool = False
    c: np.ndarray = field(init=False)   # (L, S, K), beta*alpha/((delta+1)(eps+1))

    def __post_init__(self):
        S, K = np.asarray(self.alpha).shape
        L = np.asarray(self.beta).shape[0]
        for name, arr, shape in (
            ("alpha", self.alpha, (S, K)),
            ("beta", self.beta, (L, S)),
            ("gamma", self.gamma, (L, K)),
            ("delta", self.delta, (L, S)),
            ("eps", self.eps, (S, K)),
            ("aoa_ris", self.aoa_ris, (S, K, 2)),
            ("aoa_ap", self.aoa_ap, (L, S, 2)),
            ("aod_ris", self.aod_ris, (L, S, 2)),
        ):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)
        if (self.alpha <= 0).any() or (self.beta <= 0).any() or (self.gamma <= 0).any():
            raise ValueError("path losses must be positive")
        if self.pure_los:
            self.c = np.zeros((L, S, K))
        else:
            if (self.delta < 0).any() or (self.eps < 0).any():
                raise ValueError("Rician factors must be nonnegative")
            self.c = (
                self.beta[:, :, None]
                * self.alpha[None, :, :]
                / ((self.delta[:, :, None] + 1.0) * (self.eps[None, :, :] + 1.0))
            )

    @property
    def dims(self):
        L, S = self.beta.shape
        K = self.alpha.shape[1]
        return L, S, K


def link_weights(stats: ChannelStatistics):
    """Derived per-link weight tables shared by the rate engines.

    Everything is a plain product of path losses and Rician mixing ratios:
      m_cde = c*delta*eps, m_cd = c*delta, m_ce = c*eps  (all (L, S, K))
      w_* their square roots; w_c = sqrt(c)
      zw1 = sqrt(beta*delta/(delta+1)),  hw1 = sqrt(alpha*eps/(eps+1))
    In the pure-LoS limit these become m_cde = beta*alpha, zw1 = sqrt(beta),
    hw1 = sqrt(alpha) and every c-proportional table is zero.
    """
    L, S, K = stats.dims
    ba = stats.beta[:, :, None] * stats.alpha[None, :, :]
    if stats.pure_los:
        zero = np.zeros((L, S, K))
        return SimpleNamespace(
            c=zero,
            m_cde=ba, m_cd=zero.copy(), m_ce=zero.copy(),
            w_cde=np.sqrt(ba), w_cd=zero.copy(), w_ce=zero.copy(), w_c=zero.copy(),
            zw1=np.sqrt(stats.beta), hw1=np.sqrt(stats.alpha),
        )
    d = stats.delta[:, :, None]
    e = stats.eps[None, :, :]
    c = stats.c
    m_cd = c * d
    m_ce = c * e
    m_cde = m_cd * e
    return SimpleNamespace(
        c=c,
        m_cde=m_cde, m_cd=m_cd, m_ce=m_ce,
        w_cde=np.sqrt(m_cde), w_cd=np.sqrt(m_cd), w_ce=np.sqrt(m_ce), w_c=np.sqrt(c),
        zw1=np.sqrt(stats.beta * stats.delta / (stats.delta + 1.0)),
        hw1=np.sqrt(stats.alpha * stats.eps / (stats.eps + 1.0)),
    )


def _broadcast_factor(value, shape, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        raise ValueError(f"{name} must be scalar or shape {shape}")
    return arr.copy()


def build_statistics(topology: Topology, delta, eps, rng_seed: int) -> ChannelStatistics:
    """Large-scale statistics from geometry plus one seeded angle draw.

    Path losses follow scale * d**(-exponent) per link class.  Azimuth and
    elevation angles are each drawn uniformly on [0, 2*pi) once and are
    immutable afterwards.  delta / eps may be scalars (broadcast) or full
    per-link matrices; passing inf for both selects the pure-LoS limit.
    """
    S = topology.ris_positions.shape[0]
    K = topology.user_positions.shape[0]
    L = topology.ap_positions.shape[0]
    e_ur, e_rb, e_ub = topology.pathloss_exponents
    scale = topology.pathloss_scale

    alpha = scale * topology.dist_user_ris() ** (-e_ur)
    beta = scale * topology.dist_ris_ap() ** (-e_rb)
    gamma = scale * topology.dist_user_ap() ** (-e_ub)

    d_inf = np.all(np.isinf(delta))
    e_inf = np.all(np.isinf(eps))
    if d_inf != e_inf:
        raise ValueError("the pure-LoS limit needs both Rician factors infinite")
    pure = bool(d_inf and e_inf)
    if pure:
        delta_arr = np.full((L, S), np.inf)
        eps_arr = np.full((S, K), np.inf)
    else:
        delta_arr = _broadcast_factor(delta, (L, S), "delta")
        eps_arr = _broadcast_factor(eps, (S, K), "eps")

    rng = np.random.default_rng(rng_seed)
    two_pi = 2.0 * np.pi
    aoa_ris = rng.uniform(0.0, two_pi, size=(S, K, 2))
    aoa_ap = rng.uniform(0.0, two_pi, size=(L, S, 2))
    aod_ris = rng.uniform(0.0, two_pi, size=(L, S, 2))

    return ChannelStatistics(
        alpha=alpha, beta=beta, gamma=gamma,
        delta=delta_arr, eps=eps_arr,
        aoa_ris=aoa_ris, aoa_ap=aoa_ap, aod_ris=aod_ris,
        pure_los=pure,
    )


def random_statistics(seed, L, S, K, loss_range=(0.2, 1.0), rician_range=(0.0, 4.0),
                      pure_los=False) -> ChannelStatistics:
    """Synthetic desk-scale statistics (O(1) losses) for tests and validation."""
    rng = np.random.default_rng(seed)
    lo, hi = loss_range
    alpha = rng.uniform(lo, hi, size=(S, K))
    beta = rng.uniform(lo, hi, size=(L, S))
    gamma = rng.uniform(lo, hi, size=(L, K))
    if pure_los:
        delta = np.full((L, S), np.inf)
        eps = np.full((S, K), np.inf)
    else:
        delta = rng.uniform(*rician_range, size=(L, S))
        eps = rng.uniform(*rician_range, size=(S, K))
    two_pi = 2.0 * np.pi
    return ChannelStatistics(
        alpha=alpha, beta=beta, gamma=gamma, delta=delta, eps=eps,
        aoa_ris=rng.uniform(0, two_pi, size=(S, K, 2)),
        aoa_ap=rng.uniform(0, two_pi, size=(L, S, 2)),
        aod_ris=rng.uniform(0, two_pi, size=(L, S, 2)),
        pure_los=pure_los,
    )


# ---------------------------------------------------------------------------
# Reference scenario
# ---------------------------------------------------------------------------

def default_paper_config():
    """Reference configuration: L=5 APs with B=9 antennas, S=4 surfaces with
    R=36 elements, K=5 users, 30 dBm transmit power, -104 dBm noise,
    delta=1 / eps=10 Rician factors, 0.3 EVMs, 2-bit phase quantization,
    mu=100 smoothing, users inside a 4 m circle.
    """
    config = SystemConfig(
        L=5, S=4, K=5, B=9, R=36,
        d_over_lambda=0.5,
        p=float(dbm_to_watts(30.0)),
        sigma2=float(dbm_to_watts(-104.0)),
        mu=100.0,
    )
    hwi = HwiProfile(kappa_u=0.3, kappa_b=0.3, quant_bits=2)
    scenario = {
        "delta": 1.0,
        "eps": 10.0,
        "user_circle_radius": 4.0,
        "pathloss_exponents": (2.0, 2.5, 4.0),
        "pathloss_scale": 1e-3,
        "ris_radius": 20.0,
        "ap_radius": 50.0,
    }
    return config, hwi, scenario


def paper_default_topology(seed, L=5, S=4, K=5, user_circle_radius=4.0,
                           ris_radius=20.0, ap_radius=50.0,
                           pathloss_exponents=(2.0, 2.5, 4.0), pathloss_scale=1e-3):
    """Users uniform in a disc around the origin, surfaces and APs on fixed
    surrounding rings (coordinates are not pinned by the reference setup, only
    the distance scales are).
    """
    rng = np.random.default_rng(seed)
    phi_u = rng.uniform(0, 2 * np.pi, size=K)
    r_u = user_circle_radius * np.sqrt(rng.uniform(0, 1, size=K))
    users = np.stack([r_u * np.cos(phi_u), r_u * np.sin(phi_u)], axis=1)
    phi_s = np.pi / 4 + 2 * np.pi * np.arange(S) / max(S, 1)
    ris = ris_radius * np.stack([np.cos(phi_s), np.sin(phi_s)], axis=1)
    phi_l = 2 * np.pi * np.arange(L) / L
    aps = ap_radius * np.stack([np.cos(phi_l), np.sin(phi_l)], axis=1)
    return Topology(
        ap_positions=aps, ris_positions=ris.reshape(S, 2), user_positions=users,
        pathloss_exponents=tuple(pathloss_exponents), pathloss_scale=pathloss_scale,
    )


def paper_default_scenario(seed):
    """(config, hwi, stats) for the reference setup with seeded user drops."""
    config, hwi, sc = default_paper_config()
    topo = paper_default_topology(
        seed, L=config.L, S=config.S, K=config.K,
        user_circle_radius=sc["user_circle_radius"],
        ris_radius=sc["ris_radius"], ap_radius=sc["ap_radius"],
        pathloss_exponents=sc["pathloss_exponents"],
        pathloss_scale=sc["pathloss_scale"],
    )
    stats = build_statistics(topo, sc["delta"], sc["eps"], rng_seed=seed)
    return config, hwi, stats


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def _rician_from_json(value):
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return np.inf
        raise ValueError(f"unrecognized Rician factor {value!r}")
    if isinstance(value, list):
        return np.asarray(value, dtype=float)
    return float(value)


def load_scenario(path):
    """Read a JSON scenario file and build (config, hwi, stats, extras).

    Keys (all optional, defaults = reference scenario): L, S, K, B, R,
    d_over_lambda, p_dbm, sigma2_dbm, mu, kappa_u, kappa_b, quant_bits
    (null = ideal), delta, epsilon ("inf" selects pure LoS), seed,
    topology ("paper-default" or {ap_positions, ris_positions,
    user_positions, pathloss_exponents, pathloss_scale}).
    """
    with open(path) as fh:
        raw = json.load(fh)
    base_config, base_hwi, sc = default_paper_config()

    config = SystemConfig(
        L=int(raw.get("L", base_config.L)),
        S=int(raw.get("S", base_config.S)),
        K=int(raw.get("K", base_config.K)),
        B=int(raw.get("B", base_config.B)),
        R=int(raw.get("R", base_config.R)),
        d_over_lambda=float(raw.get("d_over_lambda", base_config.d_over_lambda)),
        p=float(dbm_to_watts(raw["p_dbm"])) if "p_dbm" in raw else base_config.p,
        sigma2=float(dbm_to_watts(raw["sigma2_dbm"])) if "sigma2_dbm" in raw else base_config.sigma2,
        mu=float(raw.get("mu", base_config.mu)),
    )
    quant = raw.get("quant_bits", base_hwi.quant_bits)
    hwi = HwiProfile(
        kappa_u=float(raw.get("kappa_u", base_hwi.kappa_u)),
        kappa_b=float(raw.get("kappa_b", base_hwi.kappa_b)),
        quant_bits=None if quant is None else int(quant),
    )
    delta = _rician_from_json(raw.get("delta", sc["delta"]))
    eps = _rician_from_json(raw.get("epsilon", raw.get("eps", sc["eps"])))
    seed = int(raw.get("seed", 0))

    topo_spec = raw.get("topology", "paper-default")
    if topo_spec == "paper-default":
        topo = paper_default_topology(
            seed, L=config.L, S=config.S, K=config.K,
            user_circle_radius=float(raw.get("user_circle_radius", sc["user_circle_radius"])),
            ris_radius=float(raw.get("ris_radius", sc["ris_radius"])),
            ap_radius=float(raw.get("ap_radius", sc["ap_radius"])),
            pathloss_exponents=tuple(raw.get("pathloss_exponents", sc["pathloss_exponents"])),
            pathloss_scale=float(raw.get("pathloss_scale", sc["pathloss_scale"])),
        )
    else:
        topo = Topology(
            ap_positions=np.asarray(topo_spec["ap_positions"], dtype=float),
            ris_positions=np.asarray(topo_spec["ris_positions"], dtype=float),
            user_positions=np.asarray(topo_spec["user_positions"], dtype=float),
            pathloss_exponents=tuple(topo_spec.get("pathloss_exponents", sc["pathloss_exponents"])),
            pathloss_scale=float(topo_spec.get("pathloss_scale", sc["pathloss_scale"])),
        )
    stats = build_statistics(topo, delta, eps, rng_seed=seed)
    extras = {"seed": seed, "topology": topo}
    return config, hwi, stats, extras
