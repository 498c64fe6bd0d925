"""Brute-force references for the optimizers and the closed-form SINR.

Nothing here shares code with the solvers in :mod:`power_control`; the grid
search works directly on per-AP power shares and evaluates the closed-form
SINR, so it is usable as an independent check at toy sizes only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel_estimation import EstimationStats, golden_section_min, gamma_sp
from .channel_model import LargeScaleState


@dataclass
class GridResult:
    t: float
    sigma: np.ndarray  # (P, K) optimal shares sqrt(eta varrho)
    evaluations: int


def _min_sinr_from_shares(sigma, varrho, beta_sum, rho_d):
    """sigma has shape (..., P, K); returns min over users, shape (...)."""
    num = rho_d * (np.sqrt(varrho) * sigma).sum(axis=-2) ** 2
    load = (sigma**2).sum(axis=-1)  # (..., P)
    den = rho_d * (beta_sum * load[..., :, None]).sum(axis=-2) + 1.0
    return (num / den).min(axis=-1)


def _shares_from_polar(r, phi, K):
    if K == 1:
        return r[..., None]
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def grid_maxmin(varrho: np.ndarray, beta_sum: np.ndarray, rho_d: float, n: int = 25,
                rounds: int = 6) -> GridResult:
    """Coarse-to-fine exhaustive search for max-min SINR, K_u in {1, 2}.

    Each AP's share vector is parametrized by a radius in [0, 1] and (for two
    users) an angle in [0, pi/2]; every round re-grids a window of +-2 cells
    around the incumbent.
    """
    P, K = varrho.shape
    if K not in (1, 2) or P * K > 6:
        raise ValueError("grid oracle supports K_u <= 2 and M_a*K_u <= 6 only")
    dims_per_ap = K
    lo = np.zeros((P, dims_per_ap))
    hi = np.ones((P, dims_per_ap))
    if K == 2:
        hi[:, 1] = np.pi / 2
    best_t, best_sigma, evals = -np.inf, None, 0
    for _ in range(rounds):
        axes = [np.linspace(lo[p, d], hi[p, d], n) for p in range(P) for d in range(dims_per_ap)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1).reshape(-1, P, dims_per_ap)
        r = pts[..., 0]
        phi = pts[..., 1] if K == 2 else None
        sigma = _shares_from_polar(r, phi, K)  # (G, P, K)
        vals = _min_sinr_from_shares(sigma, varrho, beta_sum, rho_d)
        evals += vals.size
        i = int(np.argmax(vals))
        if vals[i] > best_t:
            best_t, best_sigma = float(vals[i]), sigma[i]
        centre = pts[i]
        step = (hi - lo) / (n - 1)
        lo = np.maximum(centre - 2 * step, 0.0)
        hi = centre + 2 * step
        hi[:, 0] = np.minimum(hi[:, 0], 1.0)
        if K == 2:
            hi[:, 1] = np.minimum(hi[:, 1], np.pi / 2)
    return GridResult(best_t, best_sigma, evals)


def eta_from_shares(sigma: np.ndarray, varrho: np.ndarray) -> np.ndarray:
    return sigma**2 / varrho


def single_link_sinr(varrho, eta, beta, rho_d):
    return rho_d * eta * varrho**2 / (rho_d * beta * eta * varrho + 1.0)


def golden_single_link(eta: float, lo: float, hi: float, beta: float, rho_d: float) -> tuple[float, float]:
    """Best varrho in [lo, min(hi, 1/eta)] for one AP and one user, and its SINR."""
    top = min(hi, 1.0 / eta)
    x = golden_section_min(lambda v: -single_link_sinr(v, eta, beta, rho_d), lo, top, xtol=1e-15 * top)
    return x, float(single_link_sinr(x, eta, beta, rho_d))


def scalar_sp_variance(beta_path, bsum, p_pil, p_dt, eta_ul, noise, q):
    """Direct per-path SP variance from scalar loops (no broadcasting).

    ``bsum[q']`` is the summed large-scale gain from user q' at this AP.
    """
    other = 0.0
    dt = 0.0
    for k in range(len(bsum)):
        dt += p_dt[k] * eta_ul[k] * bsum[k]
        if k != q:
            other += p_pil[k] * eta_ul[k] * bsum[k]
    snr = p_pil[q] * eta_ul[q] / noise
    den = snr * beta_path + (other + dt) / noise + 1.0
    return snr * beta_path**2 / den


def naive_isfft(x: np.ndarray) -> np.ndarray:
    """Double-sum ISFFT on an (N, M) grid."""
    N, M = x.shape
    X = np.zeros((N, M), dtype=complex)
    for n, m in itertools.product(range(N), range(M)):
        acc = 0.0j
        for k, ell in itertools.product(range(N), range(M)):
            acc += x[k, ell] * np.exp(2j * np.pi * (n * k / N - m * ell / M))
        X[n, m] = acc / np.sqrt(M * N)
    return X


@dataclass
class SmallInstance:
    ls: LargeScaleState
    stats: EstimationStats
    eta: np.ndarray
    rho_d: float
    M: int
    N: int


def random_small_instance(rng: np.random.Generator, M: int = 4, N: int = 4, max_ap: int = 4,
                          max_user: int = 3, max_paths: int = 2) -> SmallInstance:
    """Normalized random instance: O(1) gains, random taps, random feasible eta."""
    P = int(rng.integers(1, max_ap + 1))
    K = int(rng.integers(1, max_user + 1))
    L = int(rng.integers(1, max_paths + 1))
    beta = rng.uniform(0.1, 1.0, (P, K, L))
    delay = rng.integers(0, M, (P, K, L))
    dop_int = rng.integers(-1, 2, (P, K, L))
    frac = rng.uniform(-0.5, 0.5, (P, K, L))
    ls = LargeScaleState(beta, delay, dop_int, frac)
    mu = rng.uniform(0.2, 0.8, K)
    snr = 10 ** rng.uniform(0.0, 1.0)
    stats = gamma_sp(ls, mu * snr, (1 - mu) * snr)
    shares = rng.uniform(0.05, 1.0, (P, K))
    shares /= shares.sum(axis=1, keepdims=True) * rng.uniform(1.0, 1.5, (P, 1))
    eta = shares / stats.varrho
    rho_d = 10 ** rng.uniform(-0.5, 1.0)
    return SmallInstance(ls, stats, eta, rho_d, M, N)
