import json

import numpy as np
import pytest

from riscf import scenario
from riscf.scenario import (ChannelStatistics, DegenerateGeometry, HwiProfile,
                            SystemConfig, Topology, build_statistics,
                            dbm_to_watts, default_paper_config, link_weights,
                            load_scenario, paper_default_topology)


def test_dbm_to_watts():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert dbm_to_watts(-104.0) == pytest.approx(3.9810717055e-14, rel=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        SystemConfig(L=1, S=1, K=1, B=3, R=4)     # B not a perfect square
    with pytest.raises(ValueError):
        SystemConfig(L=1, S=1, K=1, B=4, R=5)
    with pytest.raises(ValueError):
        SystemConfig(L=1, S=1, K=1, B=4, R=4, p=-1.0)
    cfg = SystemConfig(L=1, S=0, K=1, B=9, R=16)
    assert cfg.powers().shape == (1,)


def test_hwi_profile():
    hwi = HwiProfile(0.3, 0.3, quant_bits=2)
    assert hwi.kappa_r == pytest.approx(0.25)
    assert HwiProfile(quant_bits=None).kappa_r == 0.0
    assert HwiProfile(quant_bits=0).kappa_r == 1.0
    with pytest.raises(ValueError):
        HwiProfile(kappa_u=-0.1)


def test_default_paper_config():
    config, hwi, sc = default_paper_config()
    assert (config.L, config.S, config.K) == (5, 4, 5)
    assert config.B == 9 and config.R == 36
    assert config.d_over_lambda == 0.5
    assert config.p == pytest.approx(1.0)                  # 30 dBm
    assert config.sigma2 == pytest.approx(dbm_to_watts(-104.0))
    assert config.mu == 100.0
    assert hwi.kappa_u**2 == pytest.approx(0.09)
    assert hwi.kappa_b**2 == pytest.approx(0.09)
    assert hwi.kappa_r == pytest.approx(0.25)              # b = 2
    assert sc["delta"] == 1.0 and sc["eps"] == 10.0
    assert sc["user_circle_radius"] == 4.0


def test_pathloss_examples():
    topo = Topology(
        ap_positions=[[10.0, 0.0]],
        ris_positions=[[1.0, 0.0]],
        user_positions=[[0.0, 0.0]],
        pathloss_exponents=(2.0, 2.5, 4.0),
    )
    stats = build_statistics(topo, delta=1.0, eps=10.0, rng_seed=0)
    # d_UR = 1 m -> alpha = 1e-3 * 1^-2
    assert stats.alpha[0, 0] == pytest.approx(1e-3)
    # d_RB = 9 m with exponent 2.5
    assert stats.beta[0, 0] == pytest.approx(1e-3 * 9.0 ** -2.5, rel=1e-12)
    d_rb10 = Topology(ap_positions=[[11.0, 0.0]], ris_positions=[[1.0, 0.0]],
                      user_positions=[[0.0, 0.0]])
    s2 = build_statistics(d_rb10, 1.0, 10.0, rng_seed=0)
    assert s2.beta[0, 0] == pytest.approx(3.1623e-6, rel=1e-3)


def test_build_statistics_deterministic():
    topo = paper_default_topology(seed=3)
    a = build_statistics(topo, 1.0, 10.0, rng_seed=9)
    b = build_statistics(topo, 1.0, 10.0, rng_seed=9)
    for name in ("alpha", "beta", "gamma", "aoa_ris", "aoa_ap", "aod_ris"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_c_invariant():
    stats = scenario.random_statistics(4, L=3, S=2, K=2)
    lhs = stats.c * (stats.delta[:, :, None] + 1.0) * (stats.eps[None, :, :] + 1.0)
    rhs = stats.beta[:, :, None] * stats.alpha[None, :, :]
    assert np.max(np.abs(lhs - rhs) / rhs) < 1e-12


def test_degenerate_geometry():
    with pytest.raises(DegenerateGeometry):
        Topology(ap_positions=[[0.0, 0.0]], ris_positions=[[1.0, 0.0]],
                 user_positions=[[0.0, 0.0]])


def test_angles_in_range():
    stats = build_statistics(paper_default_topology(seed=1), 1.0, 10.0, rng_seed=1)
    for arr in (stats.aoa_ris, stats.aoa_ap, stats.aod_ris):
        assert arr.min() >= 0.0 and arr.max() < 2.0 * np.pi


def test_pure_los_flag():
    stats = build_statistics(paper_default_topology(seed=1), np.inf, np.inf,
                             rng_seed=1)
    assert stats.pure_los
    assert np.all(stats.c == 0.0)
    w = link_weights(stats)
    ba = stats.beta[:, :, None] * stats.alpha[None, :, :]
    assert np.allclose(w.m_cde, ba)
    assert np.all(w.w_cd == 0.0) and np.all(w.c == 0.0)
    with pytest.raises(ValueError):
        build_statistics(paper_default_topology(seed=1), np.inf, 10.0, rng_seed=1)


def test_load_scenario(tmp_path):
    path = tmp_path / "scen.json"
    path.write_text(json.dumps({
        "L": 2, "S": 1, "K": 2, "B": 4, "R": 4,
        "p_dbm": 20.0, "sigma2_dbm": -90.0,
        "kappa_u": 0.2, "kappa_b": 0.1, "quant_bits": 3,
        "delta": 2.0, "epsilon": 5.0, "seed": 7,
    }))
    config, hwi, stats, extras = load_scenario(path)
    assert config.L == 2 and config.R == 4
    assert config.p == pytest.approx(dbm_to_watts(20.0))
    assert hwi.kappa_r == pytest.approx(1 / 8)
    assert stats.delta[0, 0] == 2.0 and stats.eps[0, 0] == 5.0
    assert extras["seed"] == 7
