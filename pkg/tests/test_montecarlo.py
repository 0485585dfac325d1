import numpy as np
import pytest

from riscf import closedform, montecarlo, scenario
from riscf.channel import build_los, random_phases
from riscf.montecarlo import estimate_rate, estimate_terms, receiver_distortion_diag
from riscf.scenario import HwiProfile, SystemConfig


def test_single_trial_deterministic(small_setup):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    theta = random_phases(np.random.default_rng(0), 2, 4)
    a = estimate_terms(theta, stats, los, hwi, config, trials=1, seed=5)
    b = estimate_terms(theta, stats, los, hwi, config, trials=1, seed=5)
    assert np.array_equal(a.signal.mean, b.signal.mean)
    assert a.signal.trials == 1
    assert np.all(a.signal.half_width == 0.0)


def test_thread_invariance(small_setup):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    theta = random_phases(np.random.default_rng(0), 2, 4)
    a = estimate_terms(theta, stats, los, hwi, config, trials=2000, seed=5,
                       threads=1, batch_size=256)
    b = estimate_terms(theta, stats, los, hwi, config, trials=2000, seed=5,
                       threads=4, batch_size=256)
    for x, y in ((a.signal, b.signal), (a.interference, b.interference),
                 (a.hwi, b.hwi), (a.noise, b.noise)):
        assert np.array_equal(x.mean, y.mean)
        assert np.array_equal(x.half_width, y.half_width)


def test_no_impairments_zero_hwi(small_setup):
    stats, config, _ = small_setup
    ideal = HwiProfile(0.0, 0.0, None)
    los = build_los(stats, config)
    theta = random_phases(np.random.default_rng(1), 2, 4)
    est = estimate_terms(theta, stats, los, ideal, config, trials=500, seed=2)
    assert np.all(est.hwi.mean == 0.0)


def test_noise_no_surfaces_analytic():
    stats = scenario.random_statistics(2, L=2, S=0, K=2)
    config = SystemConfig(L=2, S=0, K=2, B=4, R=4)
    hwi = HwiProfile(0.1, 0.1, 2)
    los = build_los(stats, config)
    est = estimate_terms(np.zeros(0), stats, los, hwi, config,
                         trials=100_000, seed=3)
    expect = stats.gamma.sum(axis=0) * config.B
    assert np.max(np.abs(est.noise.mean - expect) / expect) < 0.01


def test_interval_coverage():
    """z=3 half-widths should cover the closed form nearly always."""
    hits = total = 0
    for seed in range(15):
        stats = scenario.random_statistics(seed, L=2, S=2, K=2)
        config = SystemConfig(L=2, S=2, K=2, B=4, R=4)
        hwi = HwiProfile(0.3, 0.3, 2)
        los = build_los(stats, config)
        theta = random_phases(np.random.default_rng(seed), 2, 4)
        sig, intf, hw, noi = closedform.all_terms(theta, stats, los, hwi, config)
        est = estimate_terms(theta, stats, los, hwi, config, trials=30_000,
                             seed=seed + 50)
        for cf, mc in ((sig, est.signal), (noi, est.noise), (hw, est.hwi)):
            hits += np.sum(np.abs(cf - mc.mean) <= mc.half_width)
            total += cf.size
        mask = ~np.eye(2, dtype=bool)
        hits += np.sum(np.abs(intf[mask] - est.interference.mean[mask])
                       <= est.interference.half_width[mask])
        total += mask.sum()
    assert hits / total >= 0.9


def test_receiver_distortion_consistency(small_setup):
    """The deterministic distortion variance equals the empirical mean of
    kappa_b^2 (1+kappa_u^2) sum_i p_i |qhat_i|^2 per antenna."""
    stats, config, hwi = small_setup
    from riscf.channel import aggregate_channel, sample_realization

    los = build_los(stats, config)
    theta = random_phases(np.random.default_rng(4), 2, 4)
    powers = config.powers()
    diag = receiver_distortion_diag(theta, stats, los, hwi, config, powers)
    rng = np.random.default_rng(9)
    acc = np.zeros((config.L, config.B))
    n = 4000
    for _ in range(n):
        real = sample_realization(stats, los, hwi, config, rng)
        qhat = aggregate_channel(stats, los, real, theta, with_phase_noise=True)
        acc += np.einsum("lkb,k->lb", (qhat.conj() * qhat).real, powers)
    emp = hwi.kappa_b**2 * (1 + hwi.kappa_u**2) * acc / n
    assert np.max(np.abs(emp - diag) / diag) < 0.05


def test_estimate_rate_matches_closed_form(small_setup):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    theta = random_phases(np.random.default_rng(5), 2, 4)
    rates, est = estimate_rate(theta, stats, los, hwi, config,
                               trials=50_000, seed=1)
    bd = closedform.rate(theta, stats, los, hwi, config)
    assert np.max(np.abs(rates - bd.rate) / bd.rate) < 0.02


def test_rate_monotone_in_power():
    stats = scenario.random_statistics(6, L=2, S=1, K=1)
    config = SystemConfig(L=2, S=1, K=1, B=4, R=4, p=1.0, sigma2=1.0)
    hwi = HwiProfile(0.0, 0.0, None)
    los = build_los(stats, config)
    theta = random_phases(np.random.default_rng(6), 1, 4)
    r1, _ = estimate_rate(theta, stats, los, hwi, config, powers=np.array([1.0]),
                          trials=5000, seed=3)
    r2, _ = estimate_rate(theta, stats, los, hwi, config, powers=np.array([2.0]),
                          trials=5000, seed=3)
    assert r2[0] >= r1[0]
    tiny, _ = estimate_rate(theta, stats, los, hwi, config,
                            powers=np.array([1e-30]), trials=500, seed=3)
    assert tiny[0] < 1e-12


def test_trials_validation(small_setup):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    with pytest.raises(ValueError):
        estimate_terms(np.zeros(8), stats, los, hwi, config, trials=0)


def test_csv_dump(small_setup, tmp_path):
    stats, config, hwi = small_setup
    los = build_los(stats, config)
    path = tmp_path / "batches.csv"
    estimate_terms(np.zeros(8), stats, los, hwi, config, trials=1000, seed=1,
                   batch_size=250, csv_dump=path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("batch,trials")
    assert len(lines) == 5
