import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cellfree_otfs.config import ConfigError, SystemConfig
from cellfree_otfs.harness import (
    CSV_COLUMNS,
    ExperimentSpec,
    ResultRecord,
    cdf_stats,
    drop_seed,
    pooled_samples,
    records_from_json,
    records_to_csv,
    records_to_json,
    run_experiment,
    se_from_csv,
)

SMALL = SystemConfig(M_a=6, K_u=3)


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec(SMALL, scheme="magic")
    with pytest.raises(ConfigError):
        ExperimentSpec(SMALL, n_drops=0)
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"base": {}, "colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentSpec.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentSpec(SMALL, sweep={"K_u": [0]})


def test_spec_json_round_trip():
    spec = ExperimentSpec(SMALL, "EP", 3, 9, {"K_u": [2, 3]})
    again = ExperimentSpec.from_json(json.dumps(spec.to_dict()))
    assert again == spec
    assert [c.K_u for c in again.configs()] == [2, 3]


def test_drop_seed_is_stable_hash():
    assert drop_seed(1, 2) == drop_seed(1, 2)
    assert len({drop_seed(m, d) for m in range(5) for d in range(5)}) == 25


@pytest.mark.parametrize("scheme", ["SP_joint", "SP_pct_only", "EP", "uniform_SP", "uniform_EP"])
def test_every_scheme_runs_deterministically(scheme):
    spec = ExperimentSpec(SMALL, scheme, 1, 5)
    a, b = run_experiment(spec), run_experiment(spec)
    assert [replace(r, wall_ms=0) for r in a] == [replace(r, wall_ms=0) for r in b]
    rec = a[0]
    assert len(rec.se) == SMALL.K_u and min(rec.se) >= 0
    assert rec.min_se == min(rec.se)
    assert rec.status == "Converged"


def test_parallel_matches_serial():
    spec = ExperimentSpec(SMALL, "SP_pct_only", 4, 2)
    serial = run_experiment(spec)
    par = run_experiment(spec, workers=2)
    for a, b in zip(serial, par):
        assert (a.drop, a.seed, a.se) == (b.drop, b.seed, b.se)


def test_optimized_dominates_uniform_per_drop():
    joint = run_experiment(ExperimentSpec(SMALL, "SP_joint", 4, 3))
    uni = run_experiment(ExperimentSpec(SMALL, "uniform_SP", 4, 3))
    for j, u in zip(joint, uni):
        assert j.seed == u.seed
        assert j.min_se >= u.min_se - 1e-9


def test_ep_beyond_limit_all_infeasible():
    cfg = SystemConfig(M_a=6, K_u=30)
    recs = run_experiment(ExperimentSpec(cfg, "EP", 2, 0))
    assert all(r.status == "Infeasible" for r in recs)
    assert all(len(r.se) == 30 for r in recs)
    assert pooled_samples(recs).size == 0


def test_errors_recorded_and_run_continues(monkeypatch):
    import cellfree_otfs.harness as h

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(h, "pct_only_sp", boom)
    recs = run_experiment(ExperimentSpec(SMALL, "SP_pct_only", 2, 0))
    assert [r.status for r in recs] == ["Error", "Error"]
    assert "solver exploded" in recs[0].message


def test_sweep_points_tagged():
    recs = run_experiment(ExperimentSpec(SMALL, "uniform_EP", 1, 0, {"K_u": [2, 3]}))
    assert [r.params for r in recs] == [{"K_u": 2}, {"K_u": 3}]
    assert [len(r.se) for r in recs] == [2, 3]


def test_cdf_linear_percentile():
    st_ = cdf_stats(np.arange(1, 101, dtype=float))
    assert st_.se95 == pytest.approx(5.95)
    assert st_.percentiles[50] == pytest.approx(50.5)


@given(st.floats(0, 10), st.integers(1, 50))
def test_cdf_constant_samples(v, n):
    st_ = cdf_stats([v] * n)
    assert all(p == pytest.approx(v) for p in st_.percentiles.values())


@given(st.lists(st.floats(0, 100), min_size=1, max_size=200))
def test_cdf_shape(xs):
    st_ = cdf_stats(xs)
    assert np.all(np.diff(st_.values) >= 0)
    assert np.all(np.diff(st_.cdf) > 0)
    assert st_.cdf[-1] == 1.0


def test_cdf_empty():
    with pytest.raises(ValueError):
        cdf_stats([])


def test_csv_schema_and_aggregation():
    recs = run_experiment(ExperimentSpec(SMALL, "SP_pct_only", 3, 1))
    text = records_to_csv(recs)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == 1 + 3 * SMALL.K_u
    # percentiles recomputed from the raw CSV reproduce the in-memory summary
    assert cdf_stats(se_from_csv(text)).percentiles == cdf_stats(recs).percentiles
    assert ",0\n" in text  # wall_ms zeroed without timing


def test_json_round_trip():
    recs = run_experiment(ExperimentSpec(SMALL, "uniform_SP", 2, 4))
    back = records_from_json(records_to_json(recs, timing=True))
    assert back == recs
    assert isinstance(back[0], ResultRecord)
