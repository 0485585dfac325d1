"""Experiment runner: figure-style parameter sweeps with machine-readable
CSV/JSON output, plus the acceptance checks behind `riscf verify`.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics, channel, closedform, montecarlo, optimizer, reform, scenario
from .asymptotics import ScalingMode
from .optimizer import Objective
from .scenario import (ChannelStatistics, HwiProfile, SystemConfig, dbm_to_watts,
                       random_statistics)

FIGURES = (
    "terms_vs_R", "rate_vs_rician", "rate_vs_power", "rate_vs_B", "rate_vs_R",
    "rate_vs_kappa", "rate_vs_bits", "scaling_B", "scaling_R",
)
RATE_VARIANTS = ("optimized-sum", "optimized-min", "random-phase", "ris-free")


@dataclass
class SweepSpec:
    figure: str
    grid: list
    variants: list
    seed: int = 1
    mc_trials: int = 0            # 0 = closed form only
    random_draws: int = 100       # averaging draws for the random-phase variant
    n_starts: int = 2             # restarts per optimized variant
    scenario: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure kind {self.figure!r}")
        if not self.grid:
            raise ValueError("sweep grid must be nonempty")
        if not self.variants:
            raise ValueError("variant list must be nonempty")
        for b in self.grid:
            if self.figure in ("rate_vs_B", "rate_vs_R", "terms_vs_R"):
                scenario._isqrt_exact(b, "grid value")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        return cls(**raw)


@dataclass
class ResultRow:
    figure: str
    sweep_value: float
    variant: str
    source: str                   # closed_form | monte_carlo
    per_user_rates: np.ndarray
    mc_half_width: float | None = None

    @property
    def sum_rate(self):
        return float(np.sum(self.per_user_rates))

    @property
    def min_rate(self):
        return float(np.min(self.per_user_rates))


def _fmt(x):
    return f"{x:.12g}"


def write_rate_csv(rows, path):
    if not rows:
        raise ValueError("no rows to write")
    K = len(rows[0].per_user_rates)
    header = (["figure", "sweep_value", "variant", "source", "sum_rate", "min_rate"]
              + [f"rate_u{k}" for k in range(K)] + ["mc_half_width"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([r.figure, _fmt(r.sweep_value), r.variant, r.source,
                        _fmt(r.sum_rate), _fmt(r.min_rate)]
                       + [_fmt(x) for x in r.per_user_rates]
                       + ["" if r.mc_half_width is None else _fmt(r.mc_half_width)])


def write_term_csv(rows, path):
    header = ["figure", "sweep_value", "user", "term", "value", "source",
              "mc_half_width"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([r["figure"], _fmt(r["sweep_value"]), r["user"], r["term"],
                        _fmt(r["value"]), r["source"],
                        "" if r.get("half_width") is None else _fmt(r["half_width"])])


def _base_scenario(spec: SweepSpec):
    config, hwi, defaults = scenario.default_paper_config()
    over = dict(spec.scenario)
    cfg_kwargs = dict(
        L=int(over.get("L", config.L)), S=int(over.get("S", config.S)),
        K=int(over.get("K", config.K)), B=int(over.get("B", config.B)),
        R=int(over.get("R", config.R)),
        d_over_lambda=float(over.get("d_over_lambda", config.d_over_lambda)),
        p=float(dbm_to_watts(over["p_dbm"])) if "p_dbm" in over else config.p,
        sigma2=float(dbm_to_watts(over["sigma2_dbm"])) if "sigma2_dbm" in over else config.sigma2,
        mu=float(over.get("mu", config.mu)),
    )
    hwi_kwargs = dict(
        kappa_u=float(over.get("kappa_u", hwi.kappa_u)),
        kappa_b=float(over.get("kappa_b", hwi.kappa_b)),
        quant_bits=over.get("quant_bits", hwi.quant_bits),
    )
    delta = over.get("delta", defaults["delta"])
    eps = over.get("epsilon", defaults["eps"])
    delta = np.inf if delta == "inf" else delta
    eps = np.inf if eps == "inf" else eps
    return cfg_kwargs, hwi_kwargs, delta, eps, defaults


def _stats_for(cfg_kwargs, delta, eps, defaults, seed, ris_free=False):
    S = 0 if ris_free else cfg_kwargs["S"]
    topo = scenario.paper_default_topology(
        seed, L=cfg_kwargs["L"], S=S, K=cfg_kwargs["K"],
        user_circle_radius=defaults["user_circle_radius"],
        ris_radius=defaults["ris_radius"], ap_radius=defaults["ap_radius"],
        pathloss_exponents=defaults["pathloss_exponents"],
        pathloss_scale=defaults["pathloss_scale"],
    )
    if S == 0:
        return scenario.build_statistics(topo, 0.0, 0.0, rng_seed=seed)
    return scenario.build_statistics(topo, delta, eps, rng_seed=seed)


def _theta_for_variant(variant, config, hwi, stats, spec, rng):
    S, R = stats.dims[1], config.R
    if S == 0 or variant == "random-phase":
        return None
    los = channel.build_los(stats, config)
    stacked, terms = reform.prepare(stats, los, hwi, config)
    kind = "smoothed_min" if variant == "optimized-min" else "sum_rate"
    best, _ = optimizer.multistart(
        stacked, terms, config, objective=Objective(kind, mu=config.mu),
        n_starts=spec.n_starts, seed=spec.seed,
    )
    return best.theta_star


def run_sweep(spec: SweepSpec, out_dir, threads=1):
    """Run one figure sweep; returns (rows, csv_path) and writes CSV + JSON."""
    os.makedirs(out_dir, exist_ok=True)
    if spec.figure == "terms_vs_R":
        rows = _sweep_terms(spec, threads)
        path = os.path.join(out_dir, f"{spec.figure}.csv")
        write_term_csv(rows, path)
    else:
        rows = _sweep_rates(spec, threads)
        path = os.path.join(out_dir, f"{spec.figure}.csv")
        write_rate_csv(rows, path)
    meta = {
        "figure": spec.figure, "grid": list(spec.grid), "variants": list(spec.variants),
        "seed": spec.seed, "mc_trials": spec.mc_trials, "csv": os.path.basename(path),
    }
    with open(os.path.join(out_dir, f"{spec.figure}.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
    return rows, path


def _sweep_terms(spec, threads):
    cfg_kwargs, hwi_kwargs, delta, eps, defaults = _base_scenario(spec)
    hwi = HwiProfile(**hwi_kwargs)
    rows = []
    names = ("signal", "interference", "hwi", "noise")
    for R in spec.grid:
        cfg_kwargs_r = dict(cfg_kwargs, R=int(R))
        config = SystemConfig(**cfg_kwargs_r)
        stats = _stats_for(cfg_kwargs_r, delta, eps, defaults, spec.seed)
        los = channel.build_los(stats, config)
        rng = np.random.default_rng((spec.seed, int(R)))
        theta = channel.random_phases(rng, stats.dims[1], config.R)
        powers = config.powers()
        sig, intf, hw, noi = closedform.all_terms(theta, stats, los, hwi, config, powers)
        cf = dict(signal=powers * sig, interference=intf @ powers,
                  hwi=hw, noise=config.sigma2 * noi)
        for k in range(config.K):
            for name in names:
                rows.append({"figure": spec.figure, "sweep_value": R, "user": k,
                             "term": name, "value": cf[name][k],
                             "source": "closed_form", "half_width": None})
        if spec.mc_trials:
            est = montecarlo.estimate_terms(theta, stats, los, hwi, config, powers,
                                            trials=spec.mc_trials, seed=spec.seed,
                                            threads=threads)
            mc = dict(signal=(powers * est.signal.mean, powers * est.signal.half_width),
                      interference=(est.interference.mean @ powers,
                                    est.interference.half_width @ powers),
                      hwi=(est.hwi.mean, est.hwi.half_width),
                      noise=(config.sigma2 * est.noise.mean,
                             config.sigma2 * est.noise.half_width))
            for k in range(config.K):
                for name in names:
                    rows.append({"figure": spec.figure, "sweep_value": R, "user": k,
                                 "term": name, "value": mc[name][0][k],
                                 "source": "monte_carlo",
                                 "half_width": mc[name][1][k]})
    return rows


def _point_config(spec, cfg_kwargs, hwi_kwargs, value):
    fig = spec.figure
    cfg = dict(cfg_kwargs)
    hk = dict(hwi_kwargs)
    powers_scale = 1.0
    if fig == "rate_vs_power":
        cfg["p"] = float(dbm_to_watts(value))
    elif fig == "rate_vs_B":
        cfg["B"] = int(value)
    elif fig in ("rate_vs_R",):
        cfg["R"] = int(value)
    elif fig == "rate_vs_kappa":
        hk["kappa_u"] = hk["kappa_b"] = float(value)
        hk["quant_bits"] = None
    elif fig == "rate_vs_bits":
        hk["quant_bits"] = None if value in ("ideal", None) else int(value)
    elif fig == "scaling_B":
        cfg["B"] = int(value)
        powers_scale = 1.0 / int(value)
    elif fig == "scaling_R":
        cfg["R"] = int(value)
    return cfg, hk, powers_scale


def _sweep_rates(spec, threads):
    cfg_kwargs0, hwi_kwargs0, delta0, eps0, defaults = _base_scenario(spec)
    rows = []
    for value in spec.grid:
        cfg_kwargs, hwi_kwargs, powers_scale = _point_config(
            spec, cfg_kwargs0, hwi_kwargs0, value
        )
        delta = value if spec.figure == "rate_vs_rician" else delta0
        for variant in spec.variants:
            base, _, flags = variant.partition("/")
            hk = dict(hwi_kwargs)
            if "ideal-hw" in flags:
                hk["kappa_u"] = hk["kappa_b"] = 0.0
            if "ideal-ris" in flags:
                hk["quant_bits"] = None
            hwi = HwiProfile(**hk)
            if spec.figure == "scaling_R":
                if base not in ("p-over-R", "p-over-R2"):
                    raise ValueError("scaling_R variants are p-over-R / p-over-R2")
                scale = int(value) if base == "p-over-R" else int(value) ** 2
                cfg = dict(cfg_kwargs)
                config = SystemConfig(**cfg)
                powers = config.powers(config.p / scale)
                stats = _stats_for(cfg, delta, eps0, defaults, spec.seed)
                theta = _random_theta(spec, stats, config)
                rows.append(_cf_row(spec, value, variant, config, hwi, stats,
                                    theta, powers))
                continue
            ris_free = base == "ris-free"
            cfg = dict(cfg_kwargs, S=0) if ris_free else dict(cfg_kwargs)
            config = SystemConfig(**cfg)
            powers = config.powers(config.p * powers_scale)
            stats = _stats_for(cfg, delta, eps0, defaults, spec.seed,
                               ris_free=ris_free)
            if base in ("optimized-sum", "optimized-min") and not ris_free:
                rng = np.random.default_rng(spec.seed)
                theta = _theta_for_variant(base, config, hwi, stats, spec, rng)
            else:
                theta = None
            if base == "random-phase" and not ris_free:
                rows.append(_random_phase_row(spec, value, variant, config, hwi,
                                              stats, powers))
                continue
            if theta is None:
                theta = np.zeros(stats.dims[1] * config.R)
            rows.append(_cf_row(spec, value, variant, config, hwi, stats, theta,
                                powers))
            if spec.mc_trials:
                los = channel.build_los(stats, config)
                rates, est = montecarlo.estimate_rate(
                    theta, stats, los, hwi, config, powers,
                    trials=spec.mc_trials, seed=spec.seed, threads=threads)
                hwidth = float(np.max(est.signal.half_width
                                      / np.maximum(est.signal.mean, 1e-300)))
                rows.append(ResultRow(spec.figure, value, variant, "monte_carlo",
                                      rates, mc_half_width=hwidth))
    return rows


def _random_theta(spec, stats, config):
    rng = np.random.default_rng(spec.seed)
    return channel.random_phases(rng, stats.dims[1], config.R)


def _cf_row(spec, value, variant, config, hwi, stats, theta, powers):
    los = channel.build_los(stats, config)
    bd = closedform.rate(theta, stats, los, hwi, config, powers)
    return ResultRow(spec.figure, value, variant, "closed_form", bd.rate)


def _random_phase_row(spec, value, variant, config, hwi, stats, powers):
    los = channel.build_los(stats, config)
    rng = np.random.default_rng(spec.seed)
    acc = np.zeros(config.K)
    for _ in range(spec.random_draws):
        theta = channel.random_phases(rng, stats.dims[1], config.R)
        acc += closedform.rate(theta, stats, los, hwi, config, powers).rate
    return ResultRow(spec.figure, value, variant, "closed_form",
                     acc / spec.random_draws)


# ---------------------------------------------------------------------------
# Acceptance checks (shared by `riscf verify` and the test suite)
# ---------------------------------------------------------------------------

def _rel(a, b):
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


def _result(check, passed, measured, threshold, detail=""):
    return {"id": check, "passed": bool(passed), "measured": measured,
            "threshold": threshold, "detail": detail}


def check_term_mc_agreement(level="full", threads=1):
    """Closed-form terms vs sampled means on seeded desk-scale instances."""
    trials = 100_000 if level == "full" else 10_000
    tol_main = 0.03 if level == "full" else 0.06
    tol_hwi = 0.04 if level == "full" else 0.08
    worst = {"signal": 0.0, "interference": 0.0, "hwi": 0.0, "noise": 0.0}
    for seed in range(10):
        R = 4 if seed < 5 else 16
        config = SystemConfig(L=2, S=2, K=3, B=4, R=R, p=1.0, sigma2=1.0)
        stats = random_statistics(seed, L=2, S=2, K=3)
        hwi = HwiProfile(0.3, 0.3, 2)
        los = channel.build_los(stats, config)
        theta = channel.random_phases(np.random.default_rng(seed + 100), 2, R)
        sig, intf, hw, noi = closedform.all_terms(theta, stats, los, hwi, config)
        est = montecarlo.estimate_terms(theta, stats, los, hwi, config,
                                        trials=trials, seed=seed, threads=threads)
        mask = ~np.eye(3, dtype=bool)
        worst["signal"] = max(worst["signal"], _rel(sig, est.signal.mean))
        worst["noise"] = max(worst["noise"], _rel(noi, est.noise.mean))
        worst["hwi"] = max(worst["hwi"], _rel(hw, est.hwi.mean))
        worst["interference"] = max(
            worst["interference"],
            _rel(intf[mask], est.interference.mean[mask]))
    passed = (worst["signal"] <= tol_main and worst["interference"] <= tol_main
              and worst["noise"] <= tol_main and worst["hwi"] <= tol_hwi)
    return _result("term_mc_agreement", passed, worst,
                   {"signal/interference/noise": tol_main, "hwi": tol_hwi},
                   f"{trials} trials, 10 instances")


def _random_instance(rng, trial, allow_pure=True, min_sr=1):
    while True:
        L = int(rng.integers(1, 4))
        S = int(rng.integers(0, 4))
        K = int(rng.integers(1, 4))
        B = int(rng.choice([1, 4, 9]))
        R = int(rng.choice([1, 4]))
        if S * R >= min_sr or S == 0:
            break
    pure = allow_pure and S > 0 and trial % 7 == 3
    stats = random_statistics(trial, L=L, S=S, K=K, pure_los=pure)
    config = SystemConfig(L=L, S=S, K=K, B=B, R=R, p=1.0, sigma2=1.0)
    hwi = HwiProfile(float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)),
                     [None, 0, 1, 2][trial % 4])
    powers = rng.uniform(0.5, 2.0, K)
    return stats, config, hwi, powers


def check_reform_equivalence(n_instances=100):
    """Per-index engine vs matrix form: rate and all four terms."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(n_instances):
        stats, config, hwi, powers = _random_instance(rng, trial)
        los = channel.build_los(stats, config)
        theta = channel.random_phases(rng, stats.dims[1], config.R)
        a = closedform.all_terms(theta, stats, los, hwi, config, powers)
        stacked, terms = reform.prepare(stats, los, hwi, config)
        b = reform.terms_reform(theta, stacked, terms, config, powers)
        for x, y in zip(a, b):
            worst = max(worst, _rel(x, y))
        ra = closedform.assemble_sinr(*a, powers, config.sigma2)
        rb = reform.rate_reform(theta, stacked, terms, config, powers)
        worst = max(worst, _rel(np.log2(1 + ra), rb))
    return _result("reform_equivalence", worst <= 1e-9, worst, 1e-9,
                   f"{n_instances} instances")


def check_gradient_fd(n_instances=25):
    """Analytic gradients vs central finite differences (h = 1e-6)."""
    rng = np.random.default_rng(77)
    h = 1e-6
    worst = 0.0
    for trial in range(n_instances):
        L = int(rng.integers(1, 4)); S = int(rng.integers(1, 4))
        K = int(rng.integers(1, 4)); B = int(rng.choice([1, 4]))
        stats = random_statistics(trial + 500, L=L, S=S, K=K,
                                  rician_range=(0.5, 4.0),
                                  pure_los=(trial % 6 == 5))
        config = SystemConfig(L=L, S=S, K=K, B=B, R=4, p=1.0, sigma2=1.0)
        hwi = HwiProfile(0.3, 0.3, [2, None, 1][trial % 3])
        powers = rng.uniform(0.5, 2.0, K)
        los = channel.build_los(stats, config)
        stacked, terms = reform.prepare(stats, los, hwi, config)
        theta = channel.random_phases(rng, S, 4)
        n = S * 4

        def fd_of(fun):
            out = np.empty(n)
            for j in range(n):
                tp, tm = theta.copy(), theta.copy()
                tp[j] += h
                tm[j] -= h
                out[j] = (fun(tp) - fun(tm)) / (2 * h)
            return out

        k = int(rng.integers(0, K))
        g = optimizer.grad_rate(theta, stacked, terms, config, powers, k)
        fd = fd_of(lambda th: reform.rate_reform(th, stacked, terms, config, powers)[k])
        worst = max(worst, np.max(np.abs(g - fd))
                    / max(np.max(np.abs(fd)), np.max(np.abs(g)), 1e-9))
        for obj in (Objective("sum_rate"), Objective("smoothed_min", mu=50.0)):
            g = optimizer.grad_objective(theta, stacked, terms, config, powers, obj)
            fd = fd_of(lambda th: optimizer.objective_value(
                th, stacked, terms, config, powers, obj))
            worst = max(worst, np.max(np.abs(g - fd))
                        / max(np.max(np.abs(fd)), np.max(np.abs(g)), 1e-9))
    return _result("gradient_fd", worst <= 1e-5, worst, 1e-5,
                   f"{n_instances} instances, h={h}")


def check_specialization_ris_free(n_instances=50):
    rng = np.random.default_rng(5)
    worst = 0.0
    for trial in range(n_instances):
        L, K = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        B = int(rng.choice([1, 4, 9]))
        stats = random_statistics(trial, L=L, S=0, K=K)
        config = SystemConfig(L=L, S=0, K=K, B=B, R=4, p=1.0, sigma2=1.0)
        hwi = HwiProfile(float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)),
                         int(rng.integers(0, 3)))
        powers = rng.uniform(0.5, 2.0, K)
        los = channel.build_los(stats, config)
        bd = closedform.rate(np.zeros(0), stats, los, hwi, config, powers)
        for k in range(K):
            w = asymptotics.sinr_ris_free(stats, hwi, config, powers, k)
            worst = max(worst, _rel(np.array(w), bd.sinr[k]))
    return _result("specialization_ris_free", worst <= 1e-9, worst, 1e-9,
                   f"{n_instances} instances")


def check_specialization_nlos(n_instances=50):
    rng = np.random.default_rng(6)
    worst = 0.0
    for trial in range(n_instances):
        L, S, K = (int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                   int(rng.integers(1, 4)))
        B, R = int(rng.choice([1, 4])), int(rng.choice([1, 4]))
        base = random_statistics(trial + 300, L=L, S=S, K=K)
        stats = ChannelStatistics(
            alpha=base.alpha, beta=base.beta, gamma=base.gamma,
            delta=np.zeros((L, S)), eps=base.eps,
            aoa_ris=base.aoa_ris, aoa_ap=base.aoa_ap, aod_ris=base.aod_ris)
        config = SystemConfig(L=L, S=S, K=K, B=B, R=R, p=1.0, sigma2=1.0)
        hwi = HwiProfile(float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)),
                         int(rng.integers(0, 3)))
        powers = rng.uniform(0.5, 2.0, K)
        los = channel.build_los(stats, config)
        theta = channel.random_phases(rng, S, R)
        bd = closedform.rate(theta, stats, los, hwi, config, powers)
        for k in range(K):
            w = asymptotics.sinr_nlos(stats, hwi, config, powers, k)
            worst = max(worst, _rel(np.array(w), bd.sinr[k]))
    return _result("specialization_nlos", worst <= 1e-9, worst, 1e-9,
                   f"{n_instances} instances")


def check_hwi_ceiling():
    """Surface-free SINR with kappa_u=0.3 approaches 1/0.09 as B grows."""
    stats = random_statistics(7, L=3, S=0, K=2)
    config = SystemConfig(L=3, S=0, K=2, B=4, R=4, p=1.0, sigma2=1.0)
    hwi = HwiProfile(0.3, 0.3, None)
    target = 1.0 / 0.09
    vals = [asymptotics.sinr_ris_free(stats, hwi, config, None, 0, B=b)
            for b in (100, 1000, 10_000)]
    gaps = [abs(v - target) / target for v in vals]
    passed = gaps[-1] <= 0.05 and gaps[0] >= gaps[1] >= gaps[2]
    return _result("hwi_ceiling", passed, gaps, 0.05,
                   f"SINR at B=1e2/1e3/1e4: {vals}")


def _nlos_instance(seed, L=2, S=2, K=3):
    base = random_statistics(seed, L=L, S=S, K=K)
    return ChannelStatistics(
        alpha=base.alpha, beta=base.beta, gamma=base.gamma,
        delta=np.zeros((L, S)), eps=base.eps,
        aoa_ris=base.aoa_ris, aoa_ap=base.aoa_ap, aod_ris=base.aod_ris)


def check_power_scaling_br():
    stats = _nlos_instance(11)
    hwi = HwiProfile(0.3, 0.3, 2)
    config = SystemConfig(L=2, S=2, K=3, B=4, R=4, p=1.0, sigma2=1.0)
    rows = asymptotics.convergence_probe(
        ScalingMode("per_BR", p=10.0), "NL_BR",
        [(16, 16), (64, 64), (256, 256)], stats, hwi, config)
    gaps = [float(np.max(r["rel_gap"])) for r in rows]
    passed = gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.10
    return _result("power_scaling_br", passed, gaps, 0.10,
                   "relative gap to the p/(BR) limit at (16,16)/(64,64)/(256,256)")


def check_power_scaling_r2():
    stats = _nlos_instance(11)
    hwi = HwiProfile(0.3, 0.3, 2)
    config = SystemConfig(L=2, S=2, K=3, B=4, R=4, p=1.0, sigma2=1.0)
    rows = asymptotics.convergence_probe(
        ScalingMode("per_R2", p=10.0), "none",
        [(16, 16), (16, 64), (16, 256)], stats, hwi, config)
    ratio = float(np.max(rows[-1]["sinr_general"] / rows[0]["sinr_general"]))
    return _result("power_scaling_r2", ratio < 0.20, ratio, 0.20,
                   "SINR(R=256) / SINR(R=16) under p/R^2")


def check_theta_independence():
    stats = _nlos_instance(13)
    hwi = HwiProfile(0.3, 0.3, 2)
    config = SystemConfig(L=2, S=2, K=3, B=4, R=16, p=1.0, sigma2=1.0)
    los = channel.build_los(stats, config)
    rng = np.random.default_rng(0)
    r1 = closedform.rate(channel.random_phases(rng, 2, 16), stats, los, hwi, config)
    r2 = closedform.rate(channel.random_phases(rng, 2, 16), stats, los, hwi, config)
    worst = _rel(r1.rate, r2.rate)
    return _result("theta_independence", worst <= 1e-10, worst, 1e-10,
                   "NLoS-only rate at two random phase draws")


def check_optimizer_convergence(level="full"):
    n_starts = 4 if level == "full" else 2
    need = 3 if level == "full" else 1
    config, hwi, stats = scenario.paper_default_scenario(seed=1)
    los = channel.build_los(stats, config)
    stacked, terms = reform.prepare(stats, los, hwi, config)
    _, reports = optimizer.multistart(stacked, terms, config,
                                      objective=Objective("smoothed_min", mu=config.mu),
                                      n_starts=n_starts, seed=0)
    conv = sum(r.converged and r.iterations <= 500 for r in reports)
    mono = all(np.all(np.diff(r.trajectory) >= -1e-12) for r in reports)
    passed = conv >= need and mono
    return _result("optimizer_convergence", passed,
                   {"converged": conv, "monotone": mono},
                   {"converged": need, "monotone": True},
                   f"{n_starts} starts on the reference scenario")


def check_optimizer_vs_random(level="full"):
    n_scen = 20 if level == "full" else 5
    need = 18 if level == "full" else 4
    draws = 100 if level == "full" else 30
    wins = 0
    for seed in range(1, n_scen + 1):
        config, hwi, stats = scenario.paper_default_scenario(seed=seed)
        los = channel.build_los(stats, config)
        stacked, terms = reform.prepare(stats, los, hwi, config)
        best, _ = optimizer.multistart(stacked, terms, config,
                                       objective=Objective("sum_rate"),
                                       n_starts=2, seed=seed)
        rng = np.random.default_rng(seed + 10_000)
        rand = np.mean([
            reform.rate_reform(channel.random_phases(rng, config.S, config.R),
                               stacked, terms, config).sum()
            for _ in range(draws)
        ])
        wins += best.objective_value > rand
    return _result("optimizer_vs_random", wins >= need, wins, need,
                   f"{n_scen} scenarios, {draws}-draw random-phase baseline")


def check_phase_noise_scalar(samples=100_000):
    rng = np.random.default_rng(123)
    worst = 0.0
    for kr in (0.25, 0.5, 1.0):
        draws = rng.uniform(-kr * np.pi, kr * np.pi, samples)
        mc = np.exp(1j * draws).mean()
        worst = max(worst, abs(mc - channel.sinc_moment(kr)))
    return _result("phase_noise_scalar", worst <= 0.01, worst, 0.01,
                   f"{samples} samples, kappa_r in (0.25, 0.5, 1)")


def check_phase_noise_matrix(samples=100_000):
    rng = np.random.default_rng(124)
    W = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    kr = 0.25
    draws = rng.uniform(-kr * np.pi, kr * np.pi, size=(samples, 4))
    ph = np.exp(1j * draws)
    mc = np.einsum("tr,rc,tc->rc", ph, W, ph.conj()) / samples
    s2 = channel.sinc_moment(kr) ** 2
    expect = s2 * W + (1.0 - s2) * np.diag(np.diag(W))
    worst = float(np.max(np.abs(mc - expect)))
    return _result("phase_noise_matrix", worst <= 0.02, worst, 0.02,
                   "4x4 matrix identity at kappa_r=0.25")


def verify(level="fast", threads=1, out_json=None, csv_dir=None, log=print):
    """Run every acceptance check; returns the report dict.

    fast trims the Monte-Carlo trial count and the optimizer workload; full
    runs the acceptance tolerances as stated.
    """
    if level not in ("fast", "full"):
        raise ValueError("level must be fast or full")
    checks = [
        lambda: check_phase_noise_scalar(),
        lambda: check_phase_noise_matrix(),
        lambda: check_reform_equivalence(),
        lambda: check_gradient_fd(),
        lambda: check_specialization_ris_free(),
        lambda: check_specialization_nlos(),
        lambda: check_hwi_ceiling(),
        lambda: check_power_scaling_br(),
        lambda: check_power_scaling_r2(),
        lambda: check_theta_independence(),
        lambda: check_term_mc_agreement(level, threads),
        lambda: check_optimizer_convergence(level),
        lambda: check_optimizer_vs_random(level),
    ]
    results = []
    for fn in checks:
        t0 = time.time()
        res = fn()
        res["seconds"] = round(time.time() - t0, 2)
        results.append(res)
        status = "PASS" if res["passed"] else "FAIL"
        log(f"[{status}] {res['id']}: measured={res['measured']} "
            f"threshold={res['threshold']} ({res['seconds']}s)")
    report = {"level": level, "passed": all(r["passed"] for r in results),
              "checks": results}
    if csv_dir is not None:
        _verify_csvs(csv_dir, threads)
    if out_json is not None:
        with open(out_json, "w") as fh:
            json.dump(report, fh, indent=1, default=str)
    return report


def _verify_csvs(csv_dir, threads):
    """Small sweep outputs so the plotting component has real inputs."""
    os.makedirs(csv_dir, exist_ok=True)
    small = {"L": 2, "S": 2, "K": 3, "B": 4, "R": 4}
    run_sweep(SweepSpec(figure="terms_vs_R", grid=[4, 16], variants=["all"],
                        seed=1, mc_trials=2000, scenario=small), csv_dir, threads)
    run_sweep(SweepSpec(figure="rate_vs_R", grid=[4, 16],
                        variants=["optimized-sum", "random-phase", "ris-free"],
                        seed=1, mc_trials=2000, random_draws=20,
                        scenario=small), csv_dir, threads)
    run_sweep(SweepSpec(figure="rate_vs_power", grid=[10.0, 20.0, 30.0],
                        variants=["random-phase", "ris-free", "ris-free/ideal-hw"],
                        seed=1, random_draws=20, scenario=small), csv_dir, threads)
