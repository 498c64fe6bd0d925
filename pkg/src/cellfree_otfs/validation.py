"""Oracle suites behind ``cellfree-otfs validate``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_estimation import gamma_ep, sp_coefficients, varrho_of_mu
from .channel_model import generate_drop
from .config import SystemConfig
from .oracles import grid_maxmin, random_small_instance
from .power_control import alternate_maxmin_sp, bisect_max_min, sinr_upper_bound
from .spectral_efficiency import mc_sinr_oracle, sinr_all

TRACE_SLACK = 1e-9


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def mc_agreement(n_instances: int = 10, n_draws: int = 20_000, seed: int = 0) -> SuiteResult:
    """Closed-form SINR vs Monte Carlo on random M = N = 4 instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        inst = random_small_instance(rng)
        cf = sinr_all(inst.eta, inst.stats.varrho, inst.stats.beta_sum, inst.rho_d)
        mc = mc_sinr_oracle(inst.ls, inst.stats, inst.eta, inst.rho_d, inst.M, inst.N,
                            n_draws=n_draws, seed=rng.integers(2**63))
        tol = np.maximum(0.1 * np.abs(cf), 3 * mc.stderr)
        worst = max(worst, float(np.max(np.abs(mc.sinr - cf) / tol)))
    return SuiteResult("se_vs_monte_carlo", worst <= 1.0,
                       f"{n_instances} instances, worst error / tolerance = {worst:.3f}")


def non_decreasing(trace, slack: float = TRACE_SLACK) -> bool:
    return all(b >= a - slack for a, b in zip(trace, trace[1:]))


def sca_monotonicity(n_drops: int = 5, seed: int = 0, cfg: SystemConfig | None = None) -> SuiteResult:
    """SCA inner traces and the alternating outer trace never decrease."""
    cfg = cfg or SystemConfig(M_a=10, K_u=4)
    bad = []
    for d in range(n_drops):
        _, ls = generate_drop(cfg, np.random.SeedSequence([seed, d]))
        sol = alternate_maxmin_sp(ls, cfg)
        traces = sol.info["sca_traces"] + [sol.trace]
        if not all(non_decreasing(t) for t in traces):
            bad.append(d)
    return SuiteResult("sca_monotonicity", not bad,
                       f"{n_drops} drops, non-monotone traces on drops {bad}" if bad
                       else f"{n_drops} drops, all traces non-decreasing")


def toy_config(**overrides) -> SystemConfig:
    """Two APs, two users on the default frame."""
    base = dict(M_a=2, K_u=2, area_side=0.2)
    base.update(overrides)
    return SystemConfig(**base)


def grid_agreement(n_drops: int = 3, seed: int = 0, rel_tol: float = 0.02) -> SuiteResult:
    """Bisection vs exhaustive share grid, M_a = K_u = 2, both estimation schemes."""
    cfg = toy_config()
    worst = 0.0
    for d in range(n_drops):
        _, ls = generate_drop(cfg, np.random.SeedSequence([seed, d]))
        coeff = sp_coefficients(ls, cfg)
        for varrho in (varrho_of_mu(coeff, np.full(2, 0.5)), gamma_ep(ls, cfg).varrho):
            t_ref = grid_maxmin(varrho, ls.beta_sum, cfg.rho_d).t
            eps = 1e-5 * sinr_upper_bound(varrho, ls.beta_sum, cfg.rho_d)
            t = bisect_max_min(varrho, ls.beta_sum, cfg.rho_d, eps).t
            worst = max(worst, abs(t - t_ref) / t_ref)
    return SuiteResult("grid_search_agreement", worst <= rel_tol,
                       f"{n_drops} drops x 2 schemes, worst relative gap {worst:.2e}")


def run_all(quick: bool = False, seed: int = 0) -> list[SuiteResult]:
    if quick:
        return [mc_agreement(3, 4000, seed), sca_monotonicity(2, seed), grid_agreement(1, seed)]
    return [mc_agreement(10, 20_000, seed), sca_monotonicity(5, seed), grid_agreement(3, seed)]
