"""Downlink cell-free massive MIMO with OTFS: estimation statistics, SE and max-min allocation."""

from .channel_estimation import (
    EPInfeasible,
    EstimationStats,
    gamma_ep,
    gamma_sp,
    guard_budget,
    sp_coefficients,
    varrho_of_mu,
)
from .channel_model import LargeScaleState, Topology, generate_drop
from .config import ConfigError, SystemConfig, small_config
from .harness import ExperimentSpec, ResultRecord, cdf_stats, run_experiment
from .otfs_core import build_effective_channel, isfft, sfft
from .power_control import (
    PowerSolution,
    Status,
    alternate_maxmin_sp,
    bisect_max_min,
    maxmin_ep,
    pct_only_sp,
    sca_pilot_data,
)
from .spectral_efficiency import SinrInputs, mc_sinr_oracle, se_dl, sinr_dl

__version__ = "0.1.0"
