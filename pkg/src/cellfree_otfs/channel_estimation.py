"""MMSE estimate variances for embedded-pilot (EP) and superimposed-pilot (SP) estimation.

Only the second-order statistics of the estimates are modeled.  For SP the
per-path variance is rewritten as ``mu a / (mu b + c)`` in the pilot power
fraction ``mu``; the cross-user pilot/data terms cancel so the result for user
``q`` depends on ``mu_q`` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .channel_model import LargeScaleState
from .config import SystemConfig

Scheme = Literal["EP", "SP"]


class EstimationError(ValueError):
    pass


class EPInfeasible(EstimationError):
    """Raised when the embedded-pilot guard region cannot host all users."""


@dataclass(frozen=True)
class EstimationStats:
    scheme: Scheme
    gamma: np.ndarray  # (M_a, K_u, L)
    beta: np.ndarray  # (M_a, K_u, L)

    @property
    def varrho(self) -> np.ndarray:
        return self.gamma.sum(axis=2)

    @property
    def beta_sum(self) -> np.ndarray:
        return self.beta.sum(axis=2)

    def check(self, rtol: float = 1e-12) -> None:
        if np.any(self.gamma < 0) or np.any(self.gamma > self.beta * (1 + rtol)):
            raise EstimationError("estimate variance outside [0, beta]")


def _vec(v, K: int) -> np.ndarray:
    out = np.broadcast_to(np.asarray(v, dtype=float), (K,))
    if np.any(out < 0):
        raise ValueError("SNRs and power coefficients must be non-negative")
    return out


def gamma_ep(ls: LargeScaleState, cfg: SystemConfig, rho_pil=None, rho_dt=None,
             eta_ul=None, k_hat: int | None = None) -> EstimationStats:
    """Embedded-pilot estimate variances.

    Defaults take pilot and data SNRs from ``cfg.pilot_power_ep`` and
    ``cfg.data_power_ep`` over the noise power.
    """
    P, K, L = ls.beta.shape
    k_hat = cfg.k_hat if k_hat is None else k_hat
    if not 0 <= k_hat <= cfg.k_hat_max:
        raise EstimationError(f"k_hat={k_hat} outside [0, {cfg.k_hat_max}]")
    rho_pil = _vec(cfg.pilot_power_ep / cfg.noise_power if rho_pil is None else rho_pil, K)
    rho_dt = _vec(cfg.data_power_ep / cfg.noise_power if rho_dt is None else rho_dt, K)
    eta = _vec(cfg.eta_ul_vec if eta_ul is None else eta_ul, K)
    if np.any(eta <= 0):
        raise ValueError("uplink power coefficients must be positive")
    N = cfg.N
    beta = ls.beta
    bsum = beta.sum(axis=2)  # (P, K)
    spread = (4 * cfg.k_max + 4 * k_hat + 1) / N
    # eta_q/N * (sum_q' rho'_dt eta_q'/eta_q beta_pq' - rho_dt_q spread beta_pq)
    total = (bsum * (rho_dt * eta)[None, :]).sum(axis=1)  # (P,)
    bracket = (total[:, None] - rho_dt[None, :] * eta[None, :] * spread * bsum) / N
    pil = (rho_pil * eta)[None, :, None]
    denom = pil * beta + bracket[:, :, None] + 1.0
    if np.any(denom <= 0):
        raise EstimationError("non-positive denominator in EP variance; check input scaling")
    return EstimationStats("EP", pil * beta**2 / denom, beta)


def gamma_sp(ls: LargeScaleState, rho_pil, rho_dt, eta_ul=None) -> EstimationStats:
    """Superimposed-pilot estimate variances from per-user pilot and data SNRs."""
    P, K, L = ls.beta.shape
    rho_pil = _vec(rho_pil, K)
    rho_dt = _vec(rho_dt, K)
    eta = _vec(np.ones(K) if eta_ul is None else eta_ul, K)
    beta = ls.beta
    bsum = beta.sum(axis=2)
    pil_all = (bsum * (rho_pil * eta)[None, :]).sum(axis=1)  # sum over q' of pilot terms
    dt_all = (bsum * (rho_dt * eta)[None, :]).sum(axis=1)
    other_pil = pil_all[:, None] - bsum * (rho_pil * eta)[None, :]  # exclude q' = q
    pil = (rho_pil * eta)[None, :, None]
    denom = pil * beta + other_pil[:, :, None] + dt_all[:, None, None] + 1.0
    if np.any(denom <= 0):
        raise EstimationError("non-positive denominator in SP variance")
    return EstimationStats("SP", pil * beta**2 / denom, beta)


def gamma_sp_from_mu(ls: LargeScaleState, cfg: SystemConfig, mu) -> EstimationStats:
    """SP variances with pilot power mu*P_max and data power (1 - mu)*P_max."""
    mu = np.asarray(mu, dtype=float)
    s = cfg.P_max / cfg.noise_power
    return gamma_sp(ls, mu * s, (1.0 - mu) * s, cfg.eta_ul_vec)


@dataclass(frozen=True)
class SpCoefficients:
    a: np.ndarray  # (M_a, K_u, L)
    b: np.ndarray  # (M_a, K_u, L), <= 0
    c: np.ndarray  # (M_a,)
    beta: np.ndarray  # (M_a, K_u, L)

    @property
    def varrho_max(self) -> np.ndarray:
        return (self.a / (self.b + self.c[:, None, None])).sum(axis=2)

    def gamma(self, mu) -> np.ndarray:
        """Per-path variances for mu in [0, 1], shape (M_a, K_u, L)."""
        mu = np.asarray(mu, dtype=float)[None, :, None]
        return mu * self.a / (mu * self.b + self.c[:, None, None])

    def dvarrho_dmu(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)[None, :, None]
        c = self.c[:, None, None]
        return (self.a * c / (mu * self.b + c) ** 2).sum(axis=2)

    def stats(self, mu) -> EstimationStats:
        return EstimationStats("SP", self.gamma(mu), self.beta)


def sp_coefficients(ls: LargeScaleState, cfg: SystemConfig) -> SpCoefficients:
    eta = cfg.eta_ul_vec
    beta = ls.beta
    bsum = beta.sum(axis=2)
    Pm = cfg.P_max
    a = Pm * eta[None, :, None] * beta**2
    b = Pm * eta[None, :, None] * (beta - bsum[:, :, None])
    c = Pm * (bsum * eta[None, :]).sum(axis=1) + cfg.noise_power
    return SpCoefficients(a, b, c, beta)


def varrho_of_mu(coeff: SpCoefficients, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0) or np.any(mu >= 1):
        raise ValueError("mu must lie strictly inside (0, 1)")
    return coeff.gamma(mu).sum(axis=2)


def golden_section_min(f, lo: float, hi: float, xtol: float = 1e-13, max_iter: int = 200) -> float:
    """Minimizer of a unimodal ``f`` on [lo, hi]."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def mu_of_varrho(coeff: SpCoefficients, q: int, target, lo: float = 0.0,
                 hi: float = 1.0) -> tuple[float, float]:
    """Pilot fraction of user ``q`` whose varrho column best fits ``target``.

    Returns ``(mu, residual)`` where the residual is the relative 2-norm misfit.
    """
    target = np.asarray(target, dtype=float)
    if target.ndim != 1 or target.size != coeff.a.shape[0] or not np.all(np.isfinite(target)):
        raise ValueError("target must be a finite vector with one entry per AP")
    scale = np.linalg.norm(target)
    if scale == 0:
        raise ValueError("degenerate all-zero target")
    a = coeff.a[:, q, :]
    b = coeff.b[:, q, :]
    c = coeff.c[:, None]

    def column(mu: float) -> np.ndarray:
        return (mu * a / (mu * b + c)).sum(axis=1)

    def misfit(mu: float) -> float:
        return float(np.sum(((column(mu) - target) / scale) ** 2))

    mu = golden_section_min(misfit, lo, hi)
    return mu, math.sqrt(misfit(mu))


def guard_budget(ell_max: int, k_max: int, k_hat: int, M: int, N: int) -> tuple[int, int]:
    """Embedded-pilot overhead per user and the number of users it allows."""
    if min(ell_max, k_max, k_hat) < 0:
        raise ValueError("indices must be non-negative")
    n_guard = (2 * ell_max + 1) * (4 * k_max + 4 * k_hat + 1)
    if n_guard > M * N:
        raise EPInfeasible(f"guard region {n_guard} exceeds frame size {M * N}")
    return n_guard, (M * N) // n_guard


def ep_user_limit(cfg: SystemConfig) -> int:
    return guard_budget(cfg.ell_max, cfg.k_max, cfg.k_hat, cfg.M, cfg.N)[1]
