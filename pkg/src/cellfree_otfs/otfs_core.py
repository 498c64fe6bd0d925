"""Discrete OTFS transforms and dense effective delay-Doppler channels.

Grids are stored as arrays of shape ``(N, M)`` indexed ``[k, l]`` (Doppler,
delay), so a C-order ravel gives the vectorization index ``r = k*M + l``.
Time-frequency grids share the shape ``(N, M)`` indexed ``[n, m]``.

The dense matrices here are only meant for small frames; they back the Monte
Carlo check of the closed-form SINR and are never built by the optimizers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel_model import LargeScaleState

DEFAULT_ORACLE_CAP = 256


class OracleSizeError(ValueError):
    pass


def isfft(x: np.ndarray) -> np.ndarray:
    """DD grid ``x[k, l]`` -> TF grid ``X[n, m]``.

    X[n, m] = (MN)^-1/2 sum_k sum_l x[k, l] exp(j2pi(nk/N - ml/M)).
    """
    return np.fft.ifft(np.fft.fft(x, axis=1, norm="ortho"), axis=0, norm="ortho")


def sfft(Y: np.ndarray) -> np.ndarray:
    """TF grid ``Y[n, m]`` -> DD grid; the inverse of :func:`isfft`."""
    return np.fft.fft(np.fft.ifft(Y, axis=1, norm="ortho"), axis=0, norm="ortho")


def dft_matrix(N: int) -> np.ndarray:
    """Unitary DFT matrix with entries N^-1/2 exp(-j2pi kl/N)."""
    k = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)


@lru_cache(maxsize=16)
def _frame_basis(M: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    A = np.kron(dft_matrix(N), np.eye(M))
    A.setflags(write=False)
    Ah = A.conj().T.copy()
    Ah.setflags(write=False)
    return A, Ah


def _check_cap(M: int, N: int, cap: int) -> None:
    if M * N > cap:
        raise OracleSizeError(f"dense oracle refused: MN={M * N} exceeds cap {cap}")


def doppler_phases(doppler: float, M: int, N: int) -> np.ndarray:
    """Diagonal of Delta^(k+kappa): exp(j2pi (k+kappa) n / MN), n = 0..MN-1."""
    n = np.arange(M * N)
    return np.exp(2j * np.pi * doppler * n / (M * N))


def tap_matrix(delay: int, doppler: float, M: int, N: int, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """T = (F_N kron I_M) Pi^delay Delta^doppler (F_N^H kron I_M), dense MN x MN."""
    _check_cap(M, N, cap)
    A, Ah = _frame_basis(M, N)
    inner = doppler_phases(doppler, M, N)[:, None] * Ah
    # Pi = circ([0, 1, 0, ...]) shifts rows down by one
    return A @ np.roll(inner, delay, axis=0)


def link_tap_matrices(ls: LargeScaleState, p: int, q: int, M: int, N: int,
                      cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """Stack of T^(i) for link (p, q), shape (L, MN, MN)."""
    L = ls.beta.shape[2]
    return np.stack([
        tap_matrix(int(ls.delay_idx[p, q, i]),
                   float(ls.doppler_idx[p, q, i] + ls.doppler_frac[p, q, i]), M, N, cap)
        for i in range(L)
    ])


def all_tap_matrices(ls: LargeScaleState, M: int, N: int, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """T^(i) for every link, shape (M_a, K_u, L, MN, MN)."""
    P, K, _ = ls.beta.shape
    return np.stack([
        np.stack([link_tap_matrices(ls, p, q, M, N, cap) for q in range(K)]) for p in range(P)
    ])


@dataclass(frozen=True)
class ChannelRealization:
    gains: np.ndarray  # (M_a, K_u, L) complex
    taps: LargeScaleState


def draw_gains(beta: np.ndarray, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
    """Independent CN(0, beta) draws with shape ``size + beta.shape``."""
    shape = tuple(size) + beta.shape
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.sqrt(beta / 2.0) * z


def draw_realization(ls: LargeScaleState, seed=None) -> ChannelRealization:
    rng = np.random.default_rng(seed)
    return ChannelRealization(draw_gains(ls.beta, rng), ls)


def build_effective_channel(gains: np.ndarray, delays, dopplers, M: int, N: int,
                            cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """H = sum_i h_i T^(i) for one link; ``dopplers`` holds k_i + kappa_i."""
    _check_cap(M, N, cap)
    H = np.zeros((M * N, M * N), dtype=complex)
    for h, ell, nu in zip(np.atleast_1d(gains), np.atleast_1d(delays), np.atleast_1d(dopplers)):
        H += h * tap_matrix(int(ell), float(nu), M, N, cap)
    return H


def effective_channels(real: ChannelRealization, M: int, N: int,
                       cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """All H_pq of a realization, shape (M_a, K_u, MN, MN)."""
    T = all_tap_matrices(real.taps, M, N, cap)
    return np.einsum("pqi,pqirs->pqrs", real.gains, T)


def uplink_io(x_tilde: np.ndarray, H: np.ndarray, rho_dt, eta, noise: np.ndarray | None = None) -> np.ndarray:
    """Received DD vector at one AP: y = sum_q sqrt(rho_q eta_q) H_q x_q + w.

    ``x_tilde`` is (K_u, MN), ``H`` is (K_u, MN, MN).
    """
    amp = np.sqrt(np.asarray(rho_dt, dtype=float) * np.asarray(eta, dtype=float))
    y = np.einsum("q,qrs,qs->r", amp.astype(complex), H, x_tilde)
    if noise is not None:
        y = y + noise
    return y


def draw_noise(size: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    return np.sqrt(variance / 2.0) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
