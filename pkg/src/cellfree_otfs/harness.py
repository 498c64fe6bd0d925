"""Random-drop experiments, CDF statistics and result serialization.

CSV columns (one row per user per drop):

    drop, seed, scheme, user, se_bits, min_se, status, bis_iters, sca_iters, wall_ms

``seed`` is the per-drop seed derived from the master seed and the drop index,
so records do not depend on how drops are spread over workers.  ``wall_ms``
is written as 0 unless timing is requested, which keeps default outputs
byte-identical across runs.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .channel_estimation import ep_user_limit, gamma_ep, sp_coefficients, varrho_of_mu
from .channel_model import generate_drop
from .config import ConfigError, SystemConfig
from .power_control import (
    PowerSolution,
    Status,
    alternate_maxmin_sp,
    maxmin_ep,
    pct_only_sp,
    uniform_eta,
)
from .spectral_efficiency import SinrInputs, se_dl

SCHEMES = ("SP_joint", "SP_pct_only", "EP", "uniform_SP", "uniform_EP")
CSV_COLUMNS = ("drop", "seed", "scheme", "user", "se_bits", "min_se", "status",
               "bis_iters", "sca_iters", "wall_ms")
# statuses whose SE values enter the statistics
VALID_STATUSES = (Status.CONVERGED.value, Status.ITERATION_CAP.value)


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig = field(default_factory=SystemConfig)
    scheme: str = "SP_joint"
    n_drops: int = 50
    seed: int = 0
    sweep: dict[str, list[Any]] | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if int(self.n_drops) < 1:
            raise ConfigError("n_drops must be >= 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        for cfg in self.configs():
            # surfaces invalid sweep values early
            cfg.validate()

    def points(self) -> list[dict[str, Any]]:
        """Sweep points in row-major order; a single empty point without a sweep."""
        if not self.sweep:
            return [{}]
        names = list(self.sweep)
        return [dict(zip(names, vals)) for vals in itertools.product(*(self.sweep[n] for n in names))]

    def configs(self) -> list[SystemConfig]:
        out = []
        for pt in self.points():
            try:
                out.append(self.base.replace(**pt) if pt else self.base)
            except TypeError as exc:
                raise ConfigError(f"invalid sweep parameter: {exc}") from exc
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"base": self.base.to_dict(), "scheme": self.scheme, "n_drops": self.n_drops,
                "seed": self.seed, "sweep": self.sweep, "out_dir": self.out_dir}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        kwargs = dict(data)
        kwargs["base"] = SystemConfig.from_dict(data.get("base", {}))
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


@dataclass
class ResultRecord:
    drop: int
    seed: int
    scheme: str
    se: list[float]
    min_se: float
    status: str
    bis_iters: int = 0
    sca_iters: int = 0
    wall_ms: float = 0.0
    params: dict[str, Any] = field(default_factory=dict)
    message: str = ""

    @property
    def valid(self) -> bool:
        return self.status in VALID_STATUSES

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResultRecord":
        return cls(**data)


def drop_seed(master: int, drop: int) -> int:
    """Per-drop seed, a hash of (master seed, drop index)."""
    return int(np.random.SeedSequence([int(master), int(drop)]).generate_state(1, np.uint64)[0])


def solve_scheme(ls, cfg: SystemConfig, scheme: str) -> tuple[np.ndarray, PowerSolution]:
    """Allocation for one scheme and the resulting per-user SE."""
    P, K, _ = ls.beta.shape
    if scheme in ("EP", "uniform_EP"):
        if K > ep_user_limit(cfg):
            return np.zeros(K), PowerSolution(
                np.zeros((P, K)), 0.0, Status.INFEASIBLE,
                info={"reason": f"K_u={K} exceeds EP limit {ep_user_limit(cfg)}"})
        if scheme == "EP":
            sol = maxmin_ep(ls, cfg)
            stats = gamma_ep(ls, cfg)
        else:
            stats = gamma_ep(ls, cfg)
            sol = PowerSolution(uniform_eta(stats.varrho), 0.0)
    else:
        coeff = sp_coefficients(ls, cfg)
        if scheme == "SP_joint":
            sol = alternate_maxmin_sp(ls, cfg)
        elif scheme == "SP_pct_only":
            sol = pct_only_sp(ls, cfg)
        else:
            mu = np.full(K, 0.5)
            sol = PowerSolution(uniform_eta(varrho_of_mu(coeff, mu)), 0.0, mu=mu)
        stats = coeff.stats(sol.mu)
    se = se_dl(SinrInputs(sol.eta, stats, cfg.rho_d, cfg.omega_dl))
    return np.asarray(se, dtype=float), sol


def run_drop(cfg: SystemConfig, scheme: str, master: int, drop: int,
             params: dict[str, Any] | None = None) -> ResultRecord:
    """One drop end to end; sub-module failures become an ``Error`` record."""
    seed = drop_seed(master, drop)
    start = time.perf_counter()
    K = cfg.K_u
    try:
        _, ls = generate_drop(cfg, seed)
        se, sol = solve_scheme(ls, cfg, scheme)
        status = sol.status.value
        msg = str(sol.info.get("reason", ""))
        bis = int(sol.info.get("bis_iters", 0))
        sca = int(sol.info.get("sca_iters", 0))
    except Exception as exc:  # recorded, the run continues
        se, status, msg, bis, sca = np.zeros(K), "Error", f"{type(exc).__name__}: {exc}", 0, 0
    wall = (time.perf_counter() - start) * 1e3
    se = np.clip(se, 0.0, None)
    return ResultRecord(drop, seed, scheme, [float(v) for v in se], float(se.min()), status,
                        bis, sca, wall, dict(params or {}), msg)


def _run_drop_args(args):
    return run_drop(*args)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> list[ResultRecord]:
    """All drops of every sweep point, sorted by (sweep point, drop)."""
    jobs = []
    for pt, cfg in zip(spec.points(), spec.configs()):
        for d in range(spec.n_drops):
            jobs.append((cfg, spec.scheme, spec.seed, d, pt))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_drop_args, jobs, chunksize=1))
    return [run_drop(*job) for job in jobs]


# ---------------------------------------------------------------------------
# statistics


@dataclass
class CdfStats:
    values: np.ndarray  # sorted pooled samples
    cdf: np.ndarray  # rank / n
    percentiles: dict[int, float]

    @property
    def se95(self) -> float:
        """95%-likely SE, the 5th percentile."""
        return self.percentiles[5]


PERCENTILES = (5, 10, 25, 50, 75, 90, 95)


def pooled_samples(records: Iterable[ResultRecord]) -> np.ndarray:
    return np.array([v for r in records if r.valid for v in r.se], dtype=float)


def cdf_stats(samples) -> CdfStats:
    """Empirical CDF and percentiles (linear interpolation) of per-user SE.

    Accepts result records (only valid ones are pooled) or raw samples.
    """
    samples = list(samples)
    if samples and isinstance(samples[0], ResultRecord):
        x = pooled_samples(samples)
    else:
        x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples to summarize")
    x = np.sort(x)
    cdf = np.arange(1, x.size + 1) / x.size
    pct = {p: float(np.percentile(x, p)) for p in PERCENTILES}
    return CdfStats(x, cdf, pct)


# ---------------------------------------------------------------------------
# serialization


def records_to_csv(records: Sequence[ResultRecord], timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        wall = f"{r.wall_ms:.3f}" if timing else "0"
        for u, v in enumerate(r.se):
            w.writerow([r.drop, r.seed, r.scheme, u, repr(v), repr(r.min_se), r.status,
                        r.bis_iters, r.sca_iters, wall])
    return buf.getvalue()


def se_from_csv(text: str) -> np.ndarray:
    """Per-user SE samples of valid rows, as written by :func:`records_to_csv`."""
    rows = csv.DictReader(io.StringIO(text))
    return np.array([float(r["se_bits"]) for r in rows if r["status"] in VALID_STATUSES])


def records_to_json(records: Sequence[ResultRecord], timing: bool = False) -> str:
    out = []
    for r in records:
        d = r.to_dict()
        if not timing:
            d["wall_ms"] = 0.0
        out.append(d)
    return json.dumps(out, indent=1, sort_keys=True)


def records_from_json(text: str) -> list[ResultRecord]:
    return [ResultRecord.from_dict(d) for d in json.loads(text)]


def summary_rows(groups: dict[tuple, Sequence[ResultRecord]], key_names: Sequence[str]) -> list[dict]:
    """One row of percentile statistics per group of records."""
    rows = []
    for key, recs in groups.items():
        row = dict(zip(key_names, key))
        x = pooled_samples(recs)
        row["n_samples"] = int(x.size)
        row["n_valid_drops"] = sum(r.valid for r in recs)
        if x.size:
            st = cdf_stats(x)
            row["se95"] = st.se95
            row["median"] = st.percentiles[50]
            row["mean"] = float(x.mean())
        else:
            row["se95"] = row["median"] = row["mean"] = float("nan")
        rows.append(row)
    return rows


def write_rows_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
