"""Max-min fairness resource allocation.

Notation: ``varrho[p, q]`` is the summed estimate variance of link (p, q),
``beta_sum[p, q]`` its summed large-scale gain and ``eta[p, q]`` the downlink
power-control coefficient.  Each AP must satisfy
``sum_q eta[p, q] * varrho[p, q] <= 1``.

The SOCP subproblem is parametrized by ``sigma[p, q] = sqrt(eta varrho)``,
the square root of AP p's power share for user q, which lies in [0, 1]
regardless of the absolute channel scale.  That keeps the cone programs
well conditioned even though path gains span many orders of magnitude.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from .channel_estimation import (
    EPInfeasible,
    gamma_ep,
    guard_budget,
    mu_of_varrho,
    sp_coefficients,
    varrho_of_mu,
)
from .channel_model import LargeScaleState
from .conic import INFEASIBLE, OPTIMAL, Builder, ConeBackend, default_backend
from .config import SystemConfig
from .spectral_efficiency import ap_power_usage, sinr_all

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    ITERATION_CAP = "IterationCap"
    INFEASIBLE = "Infeasible"


@dataclass
class PowerSolution:
    eta: np.ndarray
    t: float
    status: Status = Status.CONVERGED
    mu: np.ndarray | None = None
    trace: list[float] = field(default_factory=list)
    info: dict[str, Any] = field(default_factory=dict)


def uniform_eta(varrho: np.ndarray) -> np.ndarray:
    """Every AP at full power, same coefficient for all of its users."""
    load = varrho.sum(axis=1)
    if np.any(load <= 0):
        raise ValueError("AP with all-zero varrho row cannot transmit at full power")
    return np.repeat((1.0 / load)[:, None], varrho.shape[1], axis=1)


def _shares(eta: np.ndarray, varrho: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(eta * varrho, 0.0, None))


def _eta_from_shares(sigma: np.ndarray, varrho: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(varrho > 0, sigma**2 / varrho, 0.0)
    return eta


def enforce_power(eta: np.ndarray, varrho: np.ndarray) -> np.ndarray:
    """Scale down any AP row whose power usage exceeds one."""
    usage = ap_power_usage(eta, varrho)
    return eta / np.maximum(usage, 1.0)[:, None]


def sinr_upper_bound(varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float) -> float:
    """Upper bound on the max-min SINR.

    Per user, SINR_q <= rho_d (sum_p sqrt(varrho_pq))^2 (each eta_pq varrho_pq
    <= 1) and SINR_q < sum_p varrho_pq / beta_pq (Cauchy-Schwarz on the
    numerator against the own-user part of the denominator).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(beta_sum > 0, varrho / beta_sum, 0.0).sum(axis=0)
    snr = rho_d * np.sqrt(varrho).sum(axis=0) ** 2
    return float(np.min(np.minimum(ratio, snr)))


# ---------------------------------------------------------------------------
# SOCP feasibility


@dataclass
class Feasibility:
    feasible: bool
    eta: np.ndarray | None
    status: str
    residual: float = np.nan
    diagnostic: str = ""
    sizes: dict[str, int] = field(default_factory=dict)


def socp_program(t: float, varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float):
    """Cone program for 'min SINR >= t' over shares sigma and AP norms theta.

    x = [sigma (row-major P x K), theta (P)].
    """
    P, K = varrho.shape
    nv = P * K + P
    sr = np.sqrt(rho_d * varrho)
    sb = np.sqrt(rho_d * beta_sum)
    sig = np.arange(P * K).reshape(P, K)
    th = P * K + np.arange(P)
    bld = Builder(nv)
    # sigma >= 0, 0 <= theta <= 1
    bld.leq(sp.hstack([-sp.eye(P * K), sp.csr_matrix((P * K, P))]), np.zeros(P * K))
    bld.leq(sp.hstack([sp.csr_matrix((P, P * K)), sp.eye(P)]), np.ones(P))
    bld.leq(sp.hstack([sp.csr_matrix((P, P * K)), -sp.eye(P)]), np.zeros(P))
    inv_sqrt_t = 1.0 / math.sqrt(t)
    for q in range(K):
        # || (sqrt(beta_pq) theta_p, 1) || <= t^-1/2 sum_p sqrt(varrho_pq) sigma_pq
        rows = [0] * P + list(range(1, P + 1))
        cols = list(sig[:, q]) + list(th)
        vals = list(-sr[:, q] * inv_sqrt_t) + list(-sb[:, q])
        A = sp.coo_matrix((vals, (rows, cols)), shape=(P + 2, nv))
        b = np.zeros(P + 2)
        b[-1] = 1.0
        bld.soc(A, b)
    for p in range(P):
        # || sigma_p,: || <= theta_p
        rows = [0] + list(range(1, K + 1))
        cols = [th[p]] + list(sig[p])
        A = sp.coo_matrix((-np.ones(K + 1), (rows, cols)), shape=(K + 1, nv))
        bld.soc(A, np.zeros(K + 1))
    return bld.build(np.zeros(nv))


def socp_feasible(t: float, varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float,
                  backend: ConeBackend | None = None) -> Feasibility:
    if t <= 0:
        raise ValueError("target SINR must be positive")
    backend = backend or default_backend()
    P, K = varrho.shape
    prog = socp_program(t, varrho, beta_sum, rho_d)
    res = backend.solve(prog)
    if res.status == INFEASIBLE:
        return Feasibility(False, None, res.status, sizes=prog.sizes)
    if res.status != OPTIMAL:
        return Feasibility(False, None, res.status, res.residual,
                           f"backend returned {res.raw_status} (residual {res.residual:.2e})",
                           prog.sizes)
    sigma = np.clip(res.x[: P * K].reshape(P, K), 0.0, None)
    eta = enforce_power(_eta_from_shares(sigma, varrho), varrho)
    return Feasibility(True, eta, res.status, res.residual, sizes=prog.sizes)


def equalize(eta: np.ndarray, varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float,
             level: float) -> np.ndarray:
    """Scale each user's column down so that every SINR equals ``level``.

    Requires min SINR(eta) >= level.  Solves the linear system
    alpha_q A_q^2 = level (sum_q' alpha_q' D_qq' + 1) for per-user factors.
    """
    if level <= 0:
        return eta
    sigma = _shares(eta, varrho)
    A2 = (sigma * np.sqrt(rho_d * varrho)).sum(axis=0) ** 2  # (K,)
    D = (rho_d * beta_sum).T @ sigma**2  # D[q, q'] = sum_p rho beta_pq sigma_pq'^2
    K = len(A2)
    alpha = None
    try:
        alpha = np.linalg.solve(np.diag(A2) - level * D, level * np.ones(K))
    except np.linalg.LinAlgError:
        pass
    if alpha is None or np.any(alpha <= 0) or np.any(alpha > 1 + 1e-9):
        # standard interference mapping, monotone from alpha = 1
        alpha = np.ones(K)
        for _ in range(10_000):
            nxt = np.minimum(level * (D @ alpha + 1.0) / A2, 1.0)
            if np.max(np.abs(nxt - alpha)) < 1e-15:
                break
            alpha = nxt
    return eta * np.clip(alpha, 0.0, 1.0)[None, :]


def bisection_steps(lo: float, hi: float, eps: float) -> int:
    """Number of halvings that shrink [lo, hi] to width <= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if hi - lo <= eps:
        return 0
    return math.ceil(math.log2((hi - lo) / eps))


def bisect_max_min(varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float, eps: float = 1e-3,
                   eta_init: np.ndarray | None = None, backend: ConeBackend | None = None,
                   t_max: float | None = None) -> PowerSolution:
    """Bisection on the SOCP feasibility problem.

    The bracket starts at the best feasible point known up front (uniform
    allocation and, if given, ``eta_init``) and at :func:`sinr_upper_bound`.
    The returned coefficients are equalized so every user gets the same SINR.
    """
    backend = backend or default_backend()
    start = time.perf_counter()
    candidates = []
    if np.all(varrho.sum(axis=1) > 0):
        candidates.append(uniform_eta(varrho))
    if eta_init is not None:
        candidates.append(enforce_power(np.clip(eta_init, 0.0, None), varrho))
    if not candidates:
        candidates.append(np.zeros_like(varrho))
    mins = [float(sinr_all(e, varrho, beta_sum, rho_d).min()) for e in candidates]
    best = int(np.argmax(mins))
    best_eta, best_t = candidates[best], mins[best]

    lo = best_t
    hi = sinr_upper_bound(varrho, beta_sum, rho_d) if t_max is None else t_max
    hi = max(hi, lo)
    bracket0 = (lo, hi)
    brackets = [(lo, hi)]
    n_iter = bisection_steps(lo, hi, eps)
    n_failed = 0
    sizes: dict[str, int] = {}
    diagnostics = []
    for _ in range(n_iter):
        t = 0.5 * (lo + hi)
        feas = socp_feasible(t, varrho, beta_sum, rho_d, backend)
        sizes = feas.sizes
        if feas.feasible:
            lo = t
            achieved = float(sinr_all(feas.eta, varrho, beta_sum, rho_d).min())
            if achieved > best_t:
                best_eta, best_t = feas.eta, achieved
        else:
            if feas.diagnostic:
                n_failed += 1
                diagnostics.append(feas.diagnostic)
            hi = t
        brackets.append((lo, hi))

    eta = equalize(best_eta, varrho, beta_sum, rho_d, best_t)
    sinr = sinr_all(eta, varrho, beta_sum, rho_d)
    info = {
        "bis_iters": n_iter,
        "bracket0": bracket0,
        "brackets": brackets,
        "n_failed": n_failed,
        "diagnostics": diagnostics,
        "sizes": sizes,
        "wall_s": time.perf_counter() - start,
    }
    return PowerSolution(eta, float(sinr.min()), Status.CONVERGED, None, [b[0] for b in brackets], info)


# ---------------------------------------------------------------------------
# SCA for the estimate-quality subproblem


@dataclass
class ScaResult:
    varrho: np.ndarray
    t: float
    status: Status
    trace: list[float]
    iters: int
    sizes: dict[str, int] = field(default_factory=dict)


def taylor_surrogate(x, t, x0, t0):
    """First-order lower bound of 1/(x t) around (x0, t0)."""
    return 3.0 / (x0 * t0) - x / (x0**2 * t0) - t / (x0 * t0**2)


def sca_program(eta: np.ndarray, varrho_n: np.ndarray, t_n: float, lo: np.ndarray, hi: np.ndarray,
                beta_sum: np.ndarray, rho_d: float):
    """Convexified subproblem around (varrho_n, t_n), variables normalized to O(1).

    x = [r (P*K, varrho = hi * r), xi (K, x/x_n), tau (t/t_n), w1 (K), w2 (K)].
    """
    P, K = eta.shape
    nr = P * K
    i_xi = nr + np.arange(K)
    i_tau = nr + K
    i_w1 = nr + K + 1 + np.arange(K)
    i_w2 = nr + 2 * K + 1 + np.arange(K)
    nv = nr + 3 * K + 1
    ridx = np.arange(nr).reshape(P, K)

    u_n = math.sqrt(rho_d) * (np.sqrt(eta) * varrho_n).sum(axis=0)  # (K,)
    x_n = 1.0 / u_n**2
    # u_hat_q = sum_p coef_u[p, q] r_pq
    coef_u = math.sqrt(rho_d) * np.sqrt(eta) * hi / u_n[None, :]
    # interference D_q = sum_p rho beta_pq sum_q' eta_pq' hi_pq' r_pq'
    load_coef = eta * hi  # (P, K) coefficient of r_pq in AP p's load

    bld = Builder(nv)
    # (a) xi_q + tau + x_n t_n D_q <= 3 - x_n t_n
    rows, cols, vals = [], [], []
    for q in range(K):
        w = x_n[q] * t_n * rho_d * beta_sum[:, q]  # weight per AP
        rows += [q] * nr
        cols += list(ridx.ravel())
        vals += list((w[:, None] * load_coef).ravel())
        rows += [q, q]
        cols += [i_xi[q], i_tau]
        vals += [1.0, 1.0]
    bld.leq(sp.coo_matrix((vals, (rows, cols)), shape=(K, nv)), 3.0 - x_n * t_n)
    # (b) per-AP power
    rows = np.repeat(np.arange(P), K)
    bld.leq(sp.coo_matrix((load_coef.ravel(), (rows, ridx.ravel())), shape=(P, nv)), np.ones(P))
    # (c) box on r
    r_lo = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
    bld.leq(sp.hstack([sp.eye(nr), sp.csr_matrix((nr, nv - nr))]), np.ones(nr))
    bld.leq(sp.hstack([-sp.eye(nr), sp.csr_matrix((nr, nv - nr))]), -r_lo.ravel())
    # (d) xi_q * u_hat_q^2 >= 1 via w1^2 <= xi u, w2^2 <= u, 1 <= w1 w2
    for q in range(K):
        pr = list(ridx[:, q])
        cu = list(coef_u[:, q])
        # ||(2 w1, xi - u)|| <= xi + u
        A = sp.coo_matrix(
            ([-1.0] + [-c for c in cu] + [-2.0] + [-1.0] + cu,
             ([0] + [0] * P + [1] + [2] + [2] * P,
              [i_xi[q]] + pr + [i_w1[q]] + [i_xi[q]] + pr)),
            shape=(3, nv))
        bld.soc(A, np.zeros(3))
        # ||(2 w2, u - 1)|| <= u + 1
        A = sp.coo_matrix(
            ([-c for c in cu] + [-2.0] + [-c for c in cu],
             ([0] * P + [1] + [2] * P, pr + [i_w2[q]] + pr)),
            shape=(3, nv))
        bld.soc(A, np.array([1.0, 0.0, -1.0]))
        # ||(2, w1 - w2)|| <= w1 + w2
        A = sp.coo_matrix(
            ([-1.0, -1.0, -1.0, 1.0], ([0, 0, 2, 2], [i_w1[q], i_w2[q], i_w1[q], i_w2[q]])),
            shape=(3, nv))
        bld.soc(A, np.array([0.0, 2.0, 0.0]))
    c = np.zeros(nv)
    c[i_tau] = -1.0
    return bld.build(c)


def sca_pilot_data(eta: np.ndarray, varrho0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                   beta_sum: np.ndarray, rho_d: float, eps: float = 1e-4, n_iter: int = 30,
                   backend: ConeBackend | None = None) -> ScaResult:
    """Maximize the common SINR over varrho for fixed eta by successive convex approximation.

    ``lo`` and ``hi`` bound each varrho entry (they are varrho at the
    smallest and largest admissible pilot fractions).  The returned trace
    holds the exact min SINR after every accepted iterate.
    """
    backend = backend or default_backend()

    def feasible(v: np.ndarray) -> bool:
        return bool(np.all(ap_power_usage(eta, v) <= 1 + 1e-12))

    def min_sinr(v: np.ndarray) -> float:
        return float(sinr_all(eta, v, beta_sum, rho_d).min())

    v = np.clip(varrho0, lo, hi)
    if not feasible(v):
        v = lo.copy()
        if not feasible(v):
            return ScaResult(varrho0, 0.0, Status.INFEASIBLE, [], 0)
    t = min_sinr(v)
    if not t > 0:
        return ScaResult(v, t, Status.INFEASIBLE, [t], 0)

    trace = [t]
    status = Status.ITERATION_CAP
    sizes: dict[str, int] = {}
    n = 0
    for n in range(1, n_iter + 1):
        prog = sca_program(eta, v, t, lo, hi, beta_sum, rho_d)
        sizes = prog.sizes
        res = backend.solve(prog)
        if res.status != OPTIMAL:
            log.debug("SCA subproblem %s at iteration %d", res.raw_status, n)
            status = Status.CONVERGED if n > 1 else Status.ITERATION_CAP
            break
        P, K = eta.shape
        cand = np.clip(res.x[: P * K].reshape(P, K) * hi, lo, hi)
        # solver tolerance can leave a row a hair above full power
        cand = cand / np.maximum(ap_power_usage(eta, cand), 1.0)[:, None]
        t_new = min_sinr(cand)
        if t_new < t:
            # numerical noise only: the expansion point is feasible for the subproblem
            status = Status.CONVERGED
            break
        v, t_prev, t = cand, t, t_new
        trace.append(t)
        if abs(t - t_prev) < eps:
            status = Status.CONVERGED
            break
    return ScaResult(v, t, status, trace, n, sizes)


# ---------------------------------------------------------------------------
# Scheme-level solvers


def sp_bounds(coeff, cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    K = coeff.a.shape[1]
    return (varrho_of_mu(coeff, np.full(K, cfg.mu_lo)), varrho_of_mu(coeff, np.full(K, cfg.mu_hi)))


def pct_only_sp(ls: LargeScaleState, cfg: SystemConfig, mu: float = 0.5,
                backend: ConeBackend | None = None) -> PowerSolution:
    """AP power control only, pilot fraction fixed for every user."""
    coeff = sp_coefficients(ls, cfg)
    mu_vec = np.full(ls.beta.shape[1], mu)
    sol = bisect_max_min(varrho_of_mu(coeff, mu_vec), ls.beta_sum, cfg.rho_d, cfg.eps_bis,
                         backend=backend)
    sol.mu = mu_vec
    return sol


def alternate_maxmin_sp(ls: LargeScaleState, cfg: SystemConfig,
                        backend: ConeBackend | None = None) -> PowerSolution:
    """Joint pilot-fraction and AP power control for superimposed pilots.

    Alternates bisection over eta (varrho fixed) with SCA over varrho (eta
    fixed), starting from mu = 0.5.  The relaxed varrho is then mapped back
    to one pilot fraction per user and eta is re-optimized for the
    physically consistent varrho; the reported SINR is that final value.
    """
    backend = backend or default_backend()
    start = time.perf_counter()
    coeff = sp_coefficients(ls, cfg)
    K = ls.beta.shape[1]
    beta_sum = ls.beta_sum
    rho = cfg.rho_d
    lo, hi = sp_bounds(coeff, cfg)
    varrho = varrho_of_mu(coeff, np.full(K, 0.5))

    theta: list[float] = []
    sca_traces: list[list[float]] = []
    bis_iters = sca_iters = 0
    eta = None
    bisections: list[tuple[np.ndarray, PowerSolution]] = []
    first: PowerSolution | None = None
    status = Status.ITERATION_CAP
    for i in range(1, cfg.n_iter + 1):
        bis = bisect_max_min(varrho, beta_sum, rho, cfg.eps_bis, eta_init=eta, backend=backend)
        bis_iters += bis.info["bis_iters"]
        bisections.append((varrho, bis))
        if first is None:
            first = bis
        sca = sca_pilot_data(bis.eta, varrho, lo, hi, beta_sum, rho, cfg.eps_sca, cfg.n_iter, backend)
        sca_iters += sca.iters
        eta = bis.eta
        if sca.status == Status.INFEASIBLE:
            theta.append(bis.t)
            status = Status.CONVERGED
            break
        varrho = sca.varrho
        sca_traces.append(sca.trace)
        theta.append(sca.t)
        if i >= 2 and abs(theta[-2] - theta[-1]) < cfg.eps_alt:
            status = Status.CONVERGED
            break

    # one pilot fraction per user, then a consistent re-solve
    mus, resid = [], []
    for q in range(K):
        m, r = mu_of_varrho(coeff, q, varrho[:, q], cfg.mu_lo, cfg.mu_hi)
        mus.append(m)
        resid.append(r)
    mu = np.array(mus)
    varrho_rec = varrho_of_mu(coeff, mu)
    final = bisect_max_min(varrho_rec, beta_sum, rho, cfg.eps_bis, eta_init=eta, backend=backend)
    bis_iters += final.info["bis_iters"]
    bisections.append((varrho_rec, final))
    fallback = first is not None and first.t > final.t
    if fallback:
        final, mu = first, np.full(K, 0.5)
    info = {
        "relaxed_t": theta[-1] if theta else np.nan,
        "mu_residual": resid,
        "bis_iters": bis_iters,
        "sca_iters": sca_iters,
        "sca_traces": sca_traces,
        "outer_iters": len(theta),
        "fallback_to_initial": fallback,
        "bisections": bisections,  # (varrho, solution) of every bisection run
        "sizes": final.info.get("sizes", {}),
        "wall_s": time.perf_counter() - start,
    }
    return PowerSolution(final.eta, final.t, status, mu, theta, info)


def maxmin_ep(ls: LargeScaleState, cfg: SystemConfig,
              backend: ConeBackend | None = None) -> PowerSolution:
    P, K, _ = ls.beta.shape
    try:
        _, k_limit = guard_budget(cfg.ell_max, cfg.k_max, cfg.k_hat, cfg.M, cfg.N)
    except EPInfeasible as exc:
        return PowerSolution(np.zeros((P, K)), 0.0, Status.INFEASIBLE, info={"reason": str(exc)})
    if K > k_limit:
        return PowerSolution(np.zeros((P, K)), 0.0, Status.INFEASIBLE,
                             info={"reason": f"K_u={K} exceeds EP limit {k_limit}"})
    stats = gamma_ep(ls, cfg)
    return bisect_max_min(stats.varrho, stats.beta_sum, cfg.rho_d, cfg.eps_bis, backend=backend)
