"""Downlink SINR / SE with conjugate precoding, closed form and Monte Carlo.

The closed form only needs the per-link sums ``varrho_pq = sum_i gamma_pq,i``
and ``beta_pq = sum_i beta_pq,i``:

    SINR_q = rho_d (sum_p sqrt(eta_pq) varrho_pq)^2
             / (rho_d sum_p beta_pq sum_q' eta_pq' varrho_pq' + 1)

The Monte Carlo estimator draws channel realizations, builds the exact
delay-Doppler matrices and measures the signal/uncertainty/interference
powers directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel_estimation import EstimationStats
from .channel_model import LargeScaleState
from .otfs_core import DEFAULT_ORACLE_CAP, all_tap_matrices, draw_gains

POWER_SLACK = 1e-9


class PowerConstraintError(ValueError):
    pass


def ap_power_usage(eta: np.ndarray, varrho: np.ndarray) -> np.ndarray:
    """Left-hand side of the per-AP constraint, sum_q eta_pq varrho_pq."""
    return (eta * varrho).sum(axis=1)


def sinr_all(eta: np.ndarray, varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float) -> np.ndarray:
    """Closed-form SINR of every user, shape (K_u,). No constraint checks."""
    num = rho_d * (np.sqrt(eta) * varrho).sum(axis=0) ** 2
    load = ap_power_usage(eta, varrho)  # (P,)
    den = rho_d * (beta_sum * load[:, None]).sum(axis=0) + 1.0
    return num / den


def sinr_eq10(eta: np.ndarray, gamma: np.ndarray, beta: np.ndarray, rho_d: float) -> np.ndarray:
    """Per-path form with the eta_pq'/eta_pq ratios; needs eta > 0 everywhere."""
    P, K, L = gamma.shape
    g = gamma.sum(axis=2)
    out = np.empty(K)
    for q in range(K):
        num = rho_d * (np.sqrt(eta[:, q])[:, None] * gamma[:, q, :]).sum() ** 2
        den = 0.0
        for p in range(P):
            inner = g[p, q] + sum(eta[p, k] / eta[p, q] * g[p, k] for k in range(K) if k != q)
            den += eta[p, q] * beta[p, q, :].sum() * inner
        out[q] = num / (rho_d * den + 1.0)
    return out


@dataclass(frozen=True)
class SinrInputs:
    eta: np.ndarray
    stats: EstimationStats
    rho_d: float
    omega_dl: float = 0.5

    def __post_init__(self) -> None:
        if np.any(self.eta < 0):
            raise ValueError("power-control coefficients must be non-negative")
        if not 0 < self.omega_dl < 1:
            raise ValueError("omega_dl must lie in (0, 1)")
        usage = ap_power_usage(self.eta, self.stats.varrho)
        if np.any(usage > 1 + POWER_SLACK):
            raise PowerConstraintError(f"per-AP power constraint violated (max {usage.max():.6g})")


def sinr_dl(inp: SinrInputs, q: int | None = None):
    s = sinr_all(inp.eta, inp.stats.varrho, inp.stats.beta_sum, inp.rho_d)
    return s if q is None else float(s[q])


def se_from_sinr(sinr, omega_dl: float = 0.5):
    return omega_dl * np.log2(1.0 + np.asarray(sinr))


def se_dl(inp: SinrInputs, q: int | None = None):
    return se_from_sinr(sinr_dl(inp, q), inp.omega_dl)


@dataclass
class OracleResult:
    sinr: np.ndarray  # (K_u,)
    stderr: np.ndarray  # (K_u,)
    ds: np.ndarray  # |DS|^2, analytic
    bu: np.ndarray  # E|BU|^2
    self_interf: np.ndarray  # E|I_q|^2
    cross_interf: np.ndarray  # sum_q' E|I_qq'|^2
    n_draws: int
    warnings: list[str] = field(default_factory=list)


def mc_sinr_oracle(ls: LargeScaleState, stats: EstimationStats, eta: np.ndarray, rho_d: float,
                   M: int, N: int, n_draws: int = 20_000, seed=None, batch: int = 500,
                   cap: int = DEFAULT_ORACLE_CAP, target_rel_se: float = 0.03) -> OracleResult:
    """Monte Carlo SINR from exact effective channels.

    Each draw splits h = h_hat + e with h_hat ~ CN(0, gamma) and independent
    e ~ CN(0, beta - gamma).  All MN received entries are used per draw; the
    desired-signal gain uses its analytic mean.
    """
    rng = np.random.default_rng(seed)
    P, K, L = stats.gamma.shape
    MN = M * N
    T = all_tap_matrices(ls, M, N, cap)  # (P, K, L, MN, MN)
    sq_eta = np.sqrt(eta)
    ds_amp = np.sqrt(rho_d) * (sq_eta * stats.varrho).sum(axis=0)  # (K,)
    err_var = np.clip(stats.beta - stats.gamma, 0.0, None)

    # per-draw, per-user averages over r of the three effective-noise powers
    bu_s, self_s, cross_s = [], [], []
    done = 0
    while done < n_draws:
        B = min(batch, n_draws - done)
        hhat = draw_gains(stats.gamma, rng, (B,))
        h = hhat + draw_gains(err_var, rng, (B,))
        H = np.einsum("bpqi,pqirs->bpqrs", h, T)
        Hh = np.einsum("bpqi,pqirs->bpqrs", hhat, T)
        # precoded channel G_qq' = sqrt(rho_d) sum_p sqrt(eta_pq') H_pq Hhat_pq'^H
        G = np.zeros((B, K, K, MN, MN), dtype=complex)
        for p in range(P):
            Hp = H[:, p][:, :, None]  # (B, K, 1, MN, MN)
            Hhp = np.conj(np.swapaxes(Hh[:, p], -1, -2))[:, None]  # (B, 1, K, MN, MN)
            G += sq_eta[p][None, None, :, None, None] * (Hp @ Hhp)
        G *= np.sqrt(rho_d)
        diag = np.einsum("bqqrr->bqr", G)  # (B, K, MN)
        row_pow = (np.abs(G) ** 2).sum(axis=-1)  # (B, K, K, MN)
        own_rows = np.einsum("bqqr->bqr", row_pow)
        bu_s.append((np.abs(diag - ds_amp[None, :, None]) ** 2).mean(axis=-1))
        self_s.append((own_rows - np.abs(diag) ** 2).mean(axis=-1))
        cross_s.append((row_pow.sum(axis=2) - own_rows).mean(axis=-1))
        done += B

    bu = np.concatenate(bu_s)
    si = np.concatenate(self_s)
    ci = np.concatenate(cross_s)
    noise = bu + si + ci + 1.0  # (n_draws, K)
    den = noise.mean(axis=0)
    den_se = noise.std(axis=0, ddof=1) / np.sqrt(n_draws)
    ds = ds_amp**2
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = ds / den
        rel = np.where(den > 0, den_se / den, 0.0)
    warnings = []
    if np.any(rel > target_rel_se):
        warnings.append(f"relative standard error {rel.max():.3g} exceeds {target_rel_se}")
    return OracleResult(sinr, sinr * rel, ds, bu.mean(axis=0), si.mean(axis=0), ci.mean(axis=0),
                        n_draws, warnings)
