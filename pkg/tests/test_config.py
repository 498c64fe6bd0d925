import json
import math

import pytest
from hypothesis import given, strategies as st

from cellfree_otfs.config import ConfigError, SystemConfig, dbm_to_watt, small_config, watt_to_dbm


def test_defaults_are_consistent():
    cfg = SystemConfig()
    assert cfg.N_T == 2 * cfg.N
    assert cfg.omega_dl == 0.5
    assert cfg.ell_max == 1  # round(2.5us * 32 * 15 kHz) = round(1.2)
    assert cfg.k_hat_max == (64 - 37) // 4


def test_noise_power_near_minus_108_dbm():
    cfg = SystemConfig()
    assert watt_to_dbm(cfg.noise_power) == pytest.approx(-108.16, abs=0.05)
    assert cfg.rho_d == pytest.approx(1.0 / cfg.noise_power)


@pytest.mark.parametrize("change", [
    {"k_hat": -1}, {"k_hat": 7}, {"k_max": 64}, {"tau_max": 1e-3}, {"eps_bis": 0.0},
    {"eta_ul": (1.0, 0.5)}, {"eta_ul": (1.0,) * 7 + (1.5,)}, {"P_max": -1.0},
    {"d0": 0.1, "d1": 0.05}, {"mu_lo": 0.6, "mu_hi": 0.4}, {"delta_corr": 1.5},
])
def test_invalid_values_rejected(change):
    with pytest.raises(ConfigError):
        SystemConfig(**change)


def test_k_hat_upper_end_accepted():
    cfg = SystemConfig(k_hat=6)
    assert cfg.k_hat == cfg.k_hat_max


def test_json_round_trip():
    cfg = SystemConfig(M_a=5, K_u=3, eta_ul=(1.0, 0.5, 0.25))
    again = SystemConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        SystemConfig.from_dict({"M": 8, "speed": 3})


def test_replace_refreshes_derived_noise():
    cfg = SystemConfig()
    wider = cfg.replace(M=64)
    assert wider.noise_power == pytest.approx(2 * cfg.noise_power)
    pinned = SystemConfig(rho_d=10.0).replace(M=64)
    assert pinned.rho_d == 10.0


def test_small_config_is_valid():
    cfg = small_config()
    assert cfg.M * cfg.N == 16 and cfg.ell_max == 0


@given(st.floats(-150, 50))
def test_dbm_round_trip(x):
    assert watt_to_dbm(dbm_to_watt(x)) == pytest.approx(x, abs=1e-9)
    assert math.isclose(dbm_to_watt(30.0), 1.0)
