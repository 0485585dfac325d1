"""Analytic phase-shift gradients of the tractable rate form and the
accelerated gradient-ascent loop (momentum + backtracking line search) for
sum-rate and smoothed max-min objectives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reform import (StackedStatistics, ThetaWorkspace, TractableTerms,
                     terms_from_workspace)

LN2 = np.log(2.0)


@dataclass
class Objective:
    kind: str = "sum_rate"        # "sum_rate" | "smoothed_min"
    mu: float = 100.0             # smoothing sharpness for smoothed_min

    def __post_init__(self):
        if self.kind not in ("sum_rate", "smoothed_min"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.mu <= 0:
            raise ValueError("mu must be positive")


@dataclass
class OptimizeOptions:
    max_iter: int = 500
    tol: float = 1e-5             # stop when objective improvement drops below
    step_init: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 50


@dataclass
class AscentReport:
    theta_star: np.ndarray
    trajectory: list              # objective at each accepted line-search point
    iterations: int
    converged: bool
    objective_value: float = 0.0


def f_d(A, B, theta):
    """Phase gradient of Tr{A Phi B Phi^H} with Phi = diag(exp(j theta)):
    j Phi^T (A^T o B) v* - j Phi^H (A o B^T) v.  Real when A, B Hermitian.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("f_d needs two square matrices of equal size")
    v = np.exp(1j * np.asarray(theta, dtype=float).reshape(-1))
    if v.size != A.shape[0]:
        raise ValueError("theta length must match the matrix size")
    t1 = 1j * v * ((A.T * B) @ v.conj())
    t2 = -1j * v.conj() * ((A * B.T) @ v)
    return t1 + t2


def _fd_rank1(A, a, b, v):
    # f_d(A, a b^H) without materializing the rank-1 matrix
    vb = v * b
    va = v * a
    return 1j * va * (A.T @ vb.conj()) - 1j * vb.conj() * (A @ va)


def _imag_quad(w, mw):
    # Im{ conj(w) o (M w) } given mw = M @ w
    return (w.conj() * mw).imag


class _GradWorkspace:
    """Values and per-term gradients shared across users for one theta."""

    def __init__(self, tt: TractableTerms, theta, powers):
        st = tt.stacked
        self.tt = tt
        self.ws = ThetaWorkspace(tt, theta)
        self.powers = np.asarray(powers, dtype=float)
        self.signal, self.interference, self.hwi, self.noise = terms_from_workspace(
            tt, self.ws, self.powers
        )
        self.ib0 = [_imag_quad(self.ws.w[k], self.ws.gw[k]) for k in range(st.K)]

    def grad_noise(self, k):
        return 2.0 * self.ib0[k]

    def grad_signal(self, k):
        tt, ws = self.tt, self.ws
        st = tt.stacked
        w_k = ws.w[k]
        g = (4.0 * tt.s2 * ws.quad[k] + 2.0 * tt.b_coef[k]) * self.ib0[k]
        g = g + 2.0 * _imag_quad(w_k, tt.msig[k] @ w_k)
        a = ws.v * (tt.d_vec[k] * st.hbar1[k])
        g = g + 2.0 * st.B * ((w_k.conj() * (tt.G @ a)).imag
                              + (a.conj() * ws.gw[k]).imag)
        g = g + 2.0 * _imag_quad(w_k, tt.me[k] @ w_k)
        return g

    def grad_pair(self, k, i):
        tt, ws = self.tt, self.ws
        st = tt.stacked
        s2, B = tt.s2, st.B
        w_k, w_i = ws.w[k], ws.w[i]
        v = ws.v
        z = np.vdot(w_k, ws.gw[i])
        g = 2.0 * s2 * ((z * (w_i.conj() * ws.gw[k])).imag
                        + (np.conj(z) * (w_k.conj() * ws.gw[i])).imag)
        scal = np.vdot(st.hbar[i], st.u4[k, i] * st.hbar[k])
        g = g + 2.0 * B * s2 * (scal * _fd_rank1(tt.G, st.hbar1[i], st.hbar1[k], v)).real
        a_g1 = st.ug[k, i] * st.hbar[k]
        g = g + 2.0 * B * _fd_rank1(tt.m21[i], a_g1, st.hbar1[k], v).real
        a_u4 = st.u4[k, i] * st.hbar[k]
        g = g + 2.0 * B * (1.0 - s2) * _fd_rank1(tt.m31[i], a_u4, st.hbar1[k], v).real
        a_g2 = st.ug[i, k] * st.hbar[i]
        g = g + 2.0 * B * s2 * _fd_rank1(tt.m23[k, i], st.hbar[i], a_g2, v).real
        g = g + 2.0 * _imag_quad(w_k, tt.mt4[i] @ w_k)
        g = g + 2.0 * s2 * _imag_quad(w_i, tt.mt5[k] @ w_i)
        return g

    def grad_hwi(self, k, grad_signal_k, grad_pairs_k):
        tt, ws = self.tt, self.ws
        st = tt.stacked
        p = self.powers
        ku2, kb2, s2 = tt.kappa_u**2, tt.kappa_b**2, tt.s2
        g = ku2 * (p[k] * grad_signal_k
                   + sum(p[i] * grad_pairs_k[i] for i in range(st.K) if i != k))
        if kb2 == 0.0:
            return g
        zb = st.zbar1
        zw2 = (ws.zw.conj() * ws.zw).real
        acc = np.zeros_like(g)
        for i in range(st.K):
            w_i = ws.w[i]
            term = 2.0 * _imag_quad(ws.w[k], tt.mh1[i] @ ws.w[k])
            term = term + 2.0 * s2 * (
                _imag_quad(w_i, zb.conj().T @ (zw2[k] * ws.zw[i]))
                + _imag_quad(ws.w[k], zb.conj().T @ (zw2[i] * ws.zw[k]))
                + _imag_quad(w_i, tt.mh2[k] @ w_i)
            )
            acc = acc + p[i] * term
        return g + kb2 * (1.0 + ku2) * acc


def rate_gradients(theta, stacked: StackedStatistics, terms: TractableTerms,
                   config, powers=None):
    """Per-user rates, SINRs and d(rate)/d(theta) rows, shape (K, S*R)."""
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    tt = terms
    st = tt.stacked
    K = st.K
    gw = _GradWorkspace(tt, theta, powers)
    signal, interference, hwi, noise = gw.signal, gw.interference, gw.hwi, gw.noise
    denom = interference @ powers + hwi + config.sigma2 * noise
    sinr = powers * signal / denom
    rates = np.log2(1.0 + sinr)

    g_sig = [gw.grad_signal(k) for k in range(K)]
    g_pair = [[gw.grad_pair(k, i) if i != k else None for i in range(K)]
              for k in range(K)]
    grads = np.empty((K, theta_len(st)))
    for k in range(K):
        g_den = config.sigma2 * gw.grad_noise(k)
        g_den = g_den + sum(powers[i] * g_pair[k][i] for i in range(K) if i != k)
        g_den = g_den + gw.grad_hwi(k, g_sig[k], g_pair[k])
        g_sinr = (powers[k] * g_sig[k] * denom[k]
                  - powers[k] * signal[k] * g_den) / denom[k] ** 2
        grads[k] = g_sinr / (LN2 * (1.0 + sinr[k]))
    return rates, sinr, grads


def theta_len(st: StackedStatistics):
    return st.S * st.R


def grad_rate(theta, stacked, terms, config, powers, k):
    """d r_k / d theta for one user."""
    return rate_gradients(theta, stacked, terms, config, powers)[2][k]


def objective_value(theta, stacked, terms, config, powers, objective: Objective):
    from .reform import rate_reform
    rates = rate_reform(theta, stacked, terms, config, powers)
    return combine_objective(rates, objective)


def combine_objective(rates, objective: Objective):
    if objective.kind == "sum_rate":
        return float(np.sum(rates))
    # smoothed min: -(1/mu) ln sum exp(-mu r), max-shifted against overflow
    x = -objective.mu * np.asarray(rates, dtype=float)
    m = x.max()
    return float(-(m + np.log(np.sum(np.exp(x - m)))) / objective.mu)


def grad_objective(theta, stacked, terms, config, powers, objective: Objective):
    rates, sinr, grads = rate_gradients(theta, stacked, terms, config, powers)
    if objective.kind == "sum_rate":
        return grads.sum(axis=0)
    x = -objective.mu * rates
    x = x - x.max()
    wgt = np.exp(x)
    wgt = wgt / wgt.sum()
    return wgt @ grads


def momentum_step(a):
    """Next momentum coefficient: (1 + sqrt(4 a^2 + 1)) / 2 (increasing)."""
    return 0.5 * (1.0 + np.sqrt(4.0 * a * a + 1.0))


def optimize(theta0, stacked, terms, config, powers=None,
             objective: Objective | None = None,
             options: OptimizeOptions | None = None) -> AscentReport:
    """Accelerated gradient ascent: backtracked step to x_i, momentum
    extrapolation to theta_{i+1}, stop when the objective improvement falls
    below tol.  The momentum point is re-anchored at x_i whenever the
    extrapolation loses objective value, which keeps the accepted-step
    trajectory nondecreasing.
    """
    powers = config.powers() if powers is None else np.asarray(powers, dtype=float)
    objective = objective or Objective()
    opt = options or OptimizeOptions()

    def fval(th):
        return objective_value(th, stacked, terms, config, powers, objective)

    def fgrad(th):
        return grad_objective(th, stacked, terms, config, powers, objective)

    theta = np.asarray(theta0, dtype=float).reshape(-1).copy()
    x_prev = theta.copy()
    a = 1.0
    f_theta = fval(theta)
    trajectory = []
    converged = False
    iterations = 0
    t_warm = opt.step_init

    for iterations in range(1, opt.max_iter + 1):
        grad = fgrad(theta)
        gnorm2 = float(grad @ grad)
        x, f_x = theta, f_theta
        if gnorm2 > 0.0:
            # backtracking with forward expansion, warm-started from the
            # previous accepted step (a fixed unit step stalls the ascent)
            t = t_warm
            cand = theta + t * grad
            f_cand = fval(cand)
            if f_cand >= f_theta + opt.armijo * t * gnorm2:
                x, f_x = cand, f_cand
                for _ in range(opt.max_backtracks):
                    t_try = t / opt.shrink
                    cand = theta + t_try * grad
                    f_cand = fval(cand)
                    if f_cand < f_theta + opt.armijo * t_try * gnorm2:
                        break
                    t, x, f_x = t_try, cand, f_cand
                t_warm = t
            else:
                for _ in range(opt.max_backtracks):
                    t *= opt.shrink
                    cand = theta + t * grad
                    f_cand = fval(cand)
                    if f_cand >= f_theta + opt.armijo * t * gnorm2:
                        x, f_x = cand, f_cand
                        t_warm = t
                        break
        trajectory.append(f_x)

        a_next = momentum_step(a)
        theta_next = x + ((a - 1.0) / a_next) * (x - x_prev)
        f_theta_next = fval(theta_next)
        if f_theta_next < f_x:          # overshoot: restart momentum at x
            theta_next, f_theta_next, a_next = x, f_x, 1.0
        improvement = f_theta_next - f_theta
        x_prev, theta, f_theta, a = x, theta_next, f_theta_next, a_next
        if improvement < opt.tol:
            converged = True
            break

    return AscentReport(
        theta_star=np.mod(theta, 2.0 * np.pi),
        trajectory=trajectory,
        iterations=iterations,
        converged=converged,
        objective_value=f_theta,
    )


def multistart(stacked, terms, config, powers=None, objective=None,
               options=None, n_starts=4, seed=0):
    """Best-of-n random restarts; returns (best report, all reports)."""
    rng = np.random.default_rng(seed)
    n = theta_len(terms.stacked)
    reports = []
    for _ in range(max(1, n_starts)):
        theta0 = rng.uniform(0.0, 2.0 * np.pi, size=n)
        reports.append(optimize(theta0, stacked, terms, config, powers,
                                objective, options))
    best = max(reports, key=lambda r: r.objective_value)
    return best, reports
