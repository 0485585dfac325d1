import math

import numpy as np
import pytest

from riscf import scenario
from riscf.channel import (InvalidDimension, aggregate_channel, array_response,
                           build_los, random_phases, sample_realization,
                           sinc_moment)
from riscf.scenario import HwiProfile, SystemConfig


def test_array_response_single_element():
    assert np.allclose(array_response(1, 0.3, 1.2, 0.5), [1.0 + 0.0j])


def test_array_response_broadside():
    # elevation pi/2, azimuth 0: both index terms vanish
    out = array_response(4, 0.0, np.pi / 2, 0.5)
    assert np.allclose(out, np.ones(4), atol=1e-12)


def test_array_response_loop_oracle():
    X, az, el, dl = 9, 1.0, 0.7, 0.5
    out = array_response(X, az, el, dl)
    root = 3
    for x in range(1, X + 1):           # 1-based element index
        phase = 2 * np.pi * dl * (((x - 1) // root) * np.sin(el) * np.sin(az)
                                  + ((x - 1) % root) * np.cos(el))
        assert out[x - 1] == pytest.approx(np.exp(1j * phase), abs=1e-14)


def test_array_response_norm():
    for X in (1, 4, 9, 16, 36):
        out = array_response(X, 0.7, 2.1, 0.5)
        assert np.linalg.norm(out) ** 2 == pytest.approx(X, rel=1e-12)


def test_array_response_invalid():
    with pytest.raises(InvalidDimension):
        array_response(5, 0.0, 0.0, 0.5)


def test_sinc_moment_values():
    assert sinc_moment(0.0) == 1.0
    assert sinc_moment(1.0) == pytest.approx(0.0, abs=1e-15)
    assert sinc_moment(0.25) == pytest.approx(math.sin(np.pi / 4) / (np.pi / 4))
    assert sinc_moment(0.25) == pytest.approx(0.900316, abs=1e-6)


def test_los_rank_one(small_setup):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    # every 2x2 minor of each rank-1 LoS block vanishes
    for l in range(config.L):
        for s in range(config.S):
            z = los.zbar[l, s]
            minors = z[:2, :2][0, 0] * z[1, 1] - z[0, 1] * z[1, 0]
            assert abs(minors) < 1e-10
            assert np.allclose(z, np.outer(los.a_B[l, s], los.a_R_dep[l, s].conj()))
            assert np.max(np.abs(np.abs(z) - 1.0)) < 1e-12


def test_sample_statistics(small_setup):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    rng = np.random.default_rng(0)
    n = 100_000
    h = math.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    assert abs(h.real.mean()) < 0.01
    assert abs((h.conj() * h).real.mean() - 1.0) < 0.02
    real = sample_realization(stats, los, hwi, config, np.random.default_rng(1))
    assert real.h_tilde.shape == (2, 3, 4)
    assert real.theta_noise.min() >= -hwi.kappa_r * np.pi
    assert real.theta_noise.max() <= hwi.kappa_r * np.pi


def test_zero_phase_noise(small_setup):
    stats, config, _ = small_setup
    ideal = HwiProfile(0.3, 0.3, None)
    los = build_los(stats, config)
    real = sample_realization(stats, los, ideal, config, np.random.default_rng(2))
    assert np.all(real.theta_noise == 0.0)
    theta = random_phases(np.random.default_rng(3), 2, 4)
    q1 = aggregate_channel(stats, los, real, theta, with_phase_noise=False)
    q2 = aggregate_channel(stats, los, real, theta, with_phase_noise=True)
    assert np.allclose(q1, q2)


def test_aggregate_no_surfaces():
    stats = scenario.random_statistics(5, L=2, S=0, K=2)
    config = SystemConfig(L=2, S=0, K=2, B=4, R=4)
    hwi = HwiProfile(0.1, 0.1, 2)
    los = build_los(stats, config)
    real = sample_realization(stats, los, hwi, config, np.random.default_rng(0))
    q = aggregate_channel(stats, los, real, np.zeros(0), with_phase_noise=True)
    assert np.allclose(q, real.d)


def test_phase_noise_scalar_identity():
    rng = np.random.default_rng(11)
    for kr in (0.25, 0.5, 1.0):
        draws = rng.uniform(-kr * np.pi, kr * np.pi, 100_000)
        assert abs(np.exp(1j * draws).mean() - sinc_moment(kr)) < 0.01


def test_phase_noise_matrix_identity():
    rng = np.random.default_rng(12)
    W = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    kr = 0.5
    ph = np.exp(1j * rng.uniform(-kr * np.pi, kr * np.pi, size=(100_000, 4)))
    mc = np.einsum("tr,rc,tc->rc", ph, W, ph.conj()) / ph.shape[0]
    s2 = sinc_moment(kr) ** 2
    expect = s2 * W + (1 - s2) * np.diag(np.diag(W))
    assert np.max(np.abs(mc - expect)) < 0.02
