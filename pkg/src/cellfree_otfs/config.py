"""System configuration shared by every module.

All frame, channel, power and solver parameters live in one frozen
dataclass.  Derived quantities (noise power, normalized downlink SNR,
maximum delay index) are filled in at construction when left as ``None``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

BOLTZMANN = 1.380649e-23
T0_KELVIN = 290.0

# 3GPP extended vehicular A profile
EVA_DELAYS_NS = (0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0)
EVA_POWERS_DB = (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9)


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass(frozen=True)
class SystemConfig:
    # OTFS frame
    M: int = 32
    N: int = 64
    delta_f: float = 15e3
    f_c: float = 4e9
    # network
    M_a: int = 30
    K_u: int = 8
    area_side: float = 1.0
    wrap: bool = True
    # delay-Doppler channel
    L: int = 9
    k_max: int = 9
    tau_max: float = 2.5e-6
    k_hat: int = 0
    pdp_delays_ns: tuple[float, ...] = EVA_DELAYS_NS
    pdp_powers_db: tuple[float, ...] = EVA_POWERS_DB
    # large-scale fading (three-slope path loss, Hata reference)
    d0: float = 0.01
    d1: float = 0.05
    h_ap: float = 15.0
    h_user: float = 1.65
    sigma_sh: float = 8.0
    correlated: bool = True
    delta_corr: float = 0.5
    d_decorr: float = 0.1
    # powers
    noise_figure_db: float = 9.0
    noise_power: float | None = None
    ap_power: float = 1.0
    rho_d: float | None = None
    P_max: float = 1.0
    eta_ul: tuple[float, ...] | None = None
    ep_pilot_power: float | None = None
    ep_data_power: float | None = None
    # solvers
    eps_bis: float = 1e-3
    eps_sca: float = 1e-4
    eps_alt: float = 1e-3
    n_iter: int = 30
    mu_lo: float = 1e-4
    mu_hi: float = 1.0 - 1e-4
    oracle_cap: int = 256

    def __post_init__(self) -> None:
        if self.noise_power is None:
            object.__setattr__(self, "noise_power", self.thermal_noise())
        if self.rho_d is None:
            rho = self.ap_power / self.noise_power if self.noise_power > 0 else math.nan
            object.__setattr__(self, "rho_d", rho)
        if self.eta_ul is not None:
            object.__setattr__(self, "eta_ul", tuple(float(v) for v in self.eta_ul))
        object.__setattr__(self, "pdp_delays_ns", tuple(float(v) for v in self.pdp_delays_ns))
        object.__setattr__(self, "pdp_powers_db", tuple(float(v) for v in self.pdp_powers_db))
        self.validate()

    # derived ---------------------------------------------------------------

    def thermal_noise(self) -> float:
        """k_B * T0 * bandwidth * noise figure, in watts."""
        nf = 10 ** (self.noise_figure_db / 10)
        return BOLTZMANN * T0_KELVIN * self.M * self.delta_f * nf

    @property
    def N_T(self) -> int:
        return 2 * self.N

    @property
    def omega_dl(self) -> float:
        return 1.0 - self.N / self.N_T

    @property
    def ell_max(self) -> int:
        return int(round(self.tau_max * self.M * self.delta_f))

    @property
    def k_hat_max(self) -> int:
        return (self.N - 4 * self.k_max - 1) // 4

    @property
    def eta_ul_vec(self) -> np.ndarray:
        if self.eta_ul is None:
            return np.ones(self.K_u)
        return np.asarray(self.eta_ul, dtype=float)

    @property
    def pilot_power_ep(self) -> float:
        return self.P_max if self.ep_pilot_power is None else self.ep_pilot_power

    @property
    def data_power_ep(self) -> float:
        return self.P_max if self.ep_data_power is None else self.ep_data_power

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        for name in ("M", "N", "M_a", "K_u", "L", "n_iter", "oracle_cap"):
            need(int(getattr(self, name)) >= 1, f"{name} must be >= 1")
        need(self.k_max >= 0, "k_max must be >= 0")
        need(self.k_max <= self.N - 1, "k_max must be <= N - 1")
        need(0 <= self.ell_max <= self.M - 1, "round(tau_max*M*delta_f) must lie in [0, M-1]")
        need(0 <= self.k_hat <= self.k_hat_max, f"k_hat must lie in [0, {self.k_hat_max}]")
        for name in (
            "delta_f", "f_c", "area_side", "noise_power", "ap_power", "rho_d", "P_max",
            "eps_bis", "eps_sca", "eps_alt", "d0", "d1",
        ):
            need(getattr(self, name) > 0, f"{name} must be > 0")
        need(self.sigma_sh >= 0, "sigma_sh must be >= 0")
        need(self.d_decorr >= 0, "d_decorr must be >= 0")
        need(self.d0 < self.d1, "d0 must be < d1")
        need(0.0 <= self.delta_corr <= 1.0, "delta_corr must lie in [0, 1]")
        need(0.0 < self.mu_lo < self.mu_hi < 1.0, "need 0 < mu_lo < mu_hi < 1")
        need(
            len(self.pdp_delays_ns) == len(self.pdp_powers_db),
            "pdp delays and powers differ in length",
        )
        if self.eta_ul is not None:
            need(len(self.eta_ul) == self.K_u, "eta_ul must have K_u entries")
            need(all(0 < v <= 1 for v in self.eta_ul), "eta_ul entries must lie in (0, 1]")
        for name in ("ep_pilot_power", "ep_data_power"):
            v = getattr(self, name)
            need(v is None or v >= 0, f"{name} must be >= 0")

    # serialization -----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            kwargs[k] = tuple(v) if isinstance(v, list) else v
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes: Any) -> "SystemConfig":
        # derived fields follow the new frame unless they were set explicitly
        if "noise_power" not in changes and math.isclose(self.noise_power, self.thermal_noise()):
            changes["noise_power"] = None
        if "rho_d" not in changes and math.isclose(self.rho_d, self.ap_power / self.noise_power):
            changes["rho_d"] = None
        return dataclasses.replace(self, **changes)


def small_config(**overrides: Any) -> SystemConfig:
    """Configuration sized for dense oracle checks (M = N = 4, no Doppler guard)."""
    base = dict(M=4, N=4, M_a=2, K_u=2, L=2, k_max=0, tau_max=0.0,
                pdp_delays_ns=(0.0, 0.0), pdp_powers_db=(0.0, -3.0))
    base.update(overrides)
    return SystemConfig(**base)


def dbm_to_watt(dbm: float) -> float:
    return 10 ** ((dbm - 30) / 10)


def watt_to_dbm(w: float) -> float:
    return 10 * math.log10(w) + 30
