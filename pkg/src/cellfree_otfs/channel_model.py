"""Random network drops: topology, large-scale fading and delay-Doppler taps.

Path loss follows the three-slope model with a Hata-COST231 reference loss;
shadowing is either the two-component correlated model (an AP field plus a
user field, each with exponential spatial decay) or i.i.d. Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, SystemConfig

Seed = int | np.random.SeedSequence | None


@dataclass(frozen=True)
class Topology:
    ap_positions: np.ndarray  # (M_a, 2) km
    user_positions: np.ndarray  # (K_u, 2) km
    area_side: float = 1.0
    wrap: bool = True

    def distances(self) -> np.ndarray:
        """AP-to-user distances in km, shape (M_a, K_u)."""
        return pairwise_distances(self.ap_positions, self.user_positions, self.area_side, self.wrap)


@dataclass(frozen=True)
class LargeScaleState:
    beta: np.ndarray  # (M_a, K_u, L) linear power gains
    delay_idx: np.ndarray  # (M_a, K_u, L) int in [0, ell_max]
    doppler_idx: np.ndarray  # (M_a, K_u, L) int in [-k_max, k_max]
    doppler_frac: np.ndarray  # (M_a, K_u, L) float in (-0.5, 0.5]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.beta.shape

    @property
    def beta_sum(self) -> np.ndarray:
        return self.beta.sum(axis=2)

    def check(self, cfg: SystemConfig) -> None:
        """Raise ``ValueError`` if any range invariant is violated."""
        if not np.all(self.beta > 0):
            raise ValueError("large-scale gains must be strictly positive")
        if self.delay_idx.min() < 0 or self.delay_idx.max() > cfg.ell_max:
            raise ValueError("delay index outside [0, ell_max]")
        if np.abs(self.doppler_idx).max() > cfg.k_max:
            raise ValueError("Doppler index outside [-k_max, k_max]")
        if np.any(np.abs(self.doppler_frac) > 0.5):
            raise ValueError("fractional Doppler outside [-0.5, 0.5]")


def pairwise_distances(a: np.ndarray, b: np.ndarray, side: float, wrap: bool = True) -> np.ndarray:
    diff = np.abs(a[:, None, :] - b[None, :, :])
    if wrap:
        # minimum over the 9 torus images reduces to a per-axis fold
        diff = np.minimum(diff, side - diff)
    return np.sqrt((diff**2).sum(axis=-1))


def generate_topology(cfg: SystemConfig, seed: Seed = None) -> Topology:
    rng = np.random.default_rng(seed)
    aps = rng.uniform(0.0, cfg.area_side, size=(cfg.M_a, 2))
    users = rng.uniform(0.0, cfg.area_side, size=(cfg.K_u, 2))
    return Topology(aps, users, cfg.area_side, cfg.wrap)


def hata_reference_loss(cfg: SystemConfig) -> float:
    f = cfg.f_c / 1e6
    return (
        46.3
        + 33.9 * np.log10(f)
        - 13.82 * np.log10(cfg.h_ap)
        - (1.1 * np.log10(f) - 0.7) * cfg.h_user
        + (1.56 * np.log10(f) - 0.8)
    )


def path_loss(d, cfg: SystemConfig):
    """Three-slope path loss in dB (a gain, so always negative) for distance ``d`` in km."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    L = hata_reference_loss(cfg)
    d0, d1 = cfg.d0, cfg.d1
    far = -L - 35.0 * np.log10(np.maximum(d, d1))
    mid = -L - 15.0 * np.log10(d1) - 20.0 * np.log10(np.clip(d, d0, d1))
    out = np.where(d > d1, far, mid)
    return out if out.ndim else float(out)


def spatial_correlation(points: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Exponential correlation 2^(-d/d_decorr) between points (wrap-aware)."""
    d = pairwise_distances(points, points, cfg.area_side, cfg.wrap)
    if cfg.d_decorr == 0:
        return (d == 0).astype(float)
    return 2.0 ** (-d / cfg.d_decorr)


def _correlated_field(points: np.ndarray, cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    C = spatial_correlation(points, cfg) + 1e-12 * np.eye(len(points))
    try:
        chol = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(C)
        raise ValueError(
            f"shadowing correlation matrix not positive definite (min eigenvalue {w.min():.3e})"
        ) from exc
    return chol @ rng.standard_normal(len(points))


def shadowing_z(topo: Topology, cfg: SystemConfig, seed: Seed = None) -> np.ndarray:
    """Unit-variance shadowing variables z_pq, shape (M_a, K_u)."""
    rng = np.random.default_rng(seed)
    P, K = len(topo.ap_positions), len(topo.user_positions)
    iid = rng.standard_normal((P, K))
    if not cfg.correlated:
        return iid
    a = _correlated_field(topo.ap_positions, cfg, rng)
    b = _correlated_field(topo.user_positions, cfg, rng)
    z = np.sqrt(cfg.delta_corr) * a[:, None] + np.sqrt(1.0 - cfg.delta_corr) * b[None, :]
    return np.where(topo.distances() > cfg.d1, z, iid)


def correlated_shadowing(topo: Topology, cfg: SystemConfig, seed: Seed = None) -> np.ndarray:
    """Shadowing in dB, sigma_sh * z_pq, shape (M_a, K_u)."""
    return cfg.sigma_sh * shadowing_z(topo, cfg, seed)


def pdp_weights(cfg: SystemConfig) -> np.ndarray:
    w = 10 ** (np.asarray(cfg.pdp_powers_db) / 10)
    return w / w.sum()


def delay_indices(cfg: SystemConfig) -> np.ndarray:
    taus = np.asarray(cfg.pdp_delays_ns) * 1e-9
    idx = np.rint(taus * cfg.M * cfg.delta_f).astype(int)
    return np.clip(idx, 0, min(cfg.ell_max, cfg.M - 1))


def generate_large_scale(
    topo: Topology, shadow_db: np.ndarray, cfg: SystemConfig, seed: Seed = None
) -> LargeScaleState:
    if len(cfg.pdp_powers_db) != cfg.L:
        raise ConfigError(f"L={cfg.L} but the power-delay profile has {len(cfg.pdp_powers_db)} taps")
    P, K = shadow_db.shape
    if (P, K) != (len(topo.ap_positions), len(topo.user_positions)):
        raise ValueError("shadowing matrix does not match topology")
    rng = np.random.default_rng(seed)
    link_gain = 10 ** ((path_loss(topo.distances(), cfg) + shadow_db) / 10)
    beta = link_gain[:, :, None] * pdp_weights(cfg)[None, None, :]
    delay = np.broadcast_to(delay_indices(cfg), (P, K, cfg.L)).copy()
    # Jakes-style Doppler: k + kappa = k_max cos(theta)
    nu = cfg.k_max * np.cos(rng.uniform(0.0, 2 * np.pi, size=(P, K, cfg.L)))
    k = np.rint(nu).astype(int)
    return LargeScaleState(beta, delay, k, nu - k)


def generate_drop(cfg: SystemConfig, seed: Seed = None) -> tuple[Topology, LargeScaleState]:
    """Topology plus large-scale state, each stage on its own child stream."""
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawning mutates the parent's child counter
        ss = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        ss = np.random.SeedSequence(seed)
    s_topo, s_shadow, s_taps = ss.spawn(3)
    topo = generate_topology(cfg, s_topo)
    shadow = correlated_shadowing(topo, cfg, s_shadow)
    return topo, generate_large_scale(topo, shadow, cfg, s_taps)
