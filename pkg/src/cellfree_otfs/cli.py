"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .channel_estimation import ep_user_limit
from .config import ConfigError
from .harness import (
    SCHEMES,
    ExperimentSpec,
    cdf_stats,
    pooled_samples,
    records_to_csv,
    records_to_json,
    run_experiment,
    summary_rows,
    write_rows_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 2, 3
FIG1_SCHEMES = ("SP_joint", "SP_pct_only", "uniform_SP", "EP", "uniform_EP")
FIG2_SCHEMES = ("SP_joint", "uniform_SP", "EP", "uniform_EP")


def _load_spec(args) -> ExperimentSpec:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        spec = ExperimentSpec.from_json(text)
    else:
        spec = ExperimentSpec()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.drops is not None:
        changes["n_drops"] = args.drops
    if getattr(args, "scheme", None):
        changes["scheme"] = args.scheme
    if changes:
        d = spec.to_dict()
        d.update(changes)
        spec = ExperimentSpec.from_dict(d)
    return spec


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _out_dir(args, spec: ExperimentSpec) -> Path | None:
    if args.out:
        return Path(args.out)
    return Path(spec.out_dir) if spec.out_dir else None


def cmd_run(args) -> int:
    spec = _load_spec(args)
    records = run_experiment(spec, workers=args.parallel)
    out = _out_dir(args, spec)
    if args.format == "json":
        _emit(records_to_json(records, args.timing) + "\n", out, "results.json")
    else:
        _emit(records_to_csv(records, args.timing), out, "results.csv")
    if out is not None:
        groups: dict[tuple, list] = {}
        for r in records:
            groups.setdefault((spec.scheme, *r.params.values()), []).append(r)
        keys = ["scheme", *(spec.sweep or {})]
        rows = summary_rows(groups, keys)
        _emit(write_rows_csv(rows, keys + ["n_valid_drops", "n_samples", "se95", "median", "mean"]),
              out, "summary.csv")
    n_bad = sum(not r.valid for r in records)
    print(f"{len(records)} drops, {n_bad} infeasible or failed", file=sys.stderr)
    return EXIT_OK


def cmd_fig1(args) -> int:
    spec = _load_spec(args)
    out = _out_dir(args, spec)
    schemes = args.schemes.split(",") if args.schemes else FIG1_SCHEMES
    cdf_rows, groups = [], {}
    for shadowing, corr in (("correlated", True), ("uncorrelated", False)):
        base = spec.base.replace(correlated=corr)
        for scheme in schemes:
            sub = ExperimentSpec(base, scheme, spec.n_drops, spec.seed)
            recs = run_experiment(sub, workers=args.parallel)
            groups[(shadowing, scheme)] = recs
            x = pooled_samples(recs)
            if x.size:
                st = cdf_stats(x)
                cdf_rows += [{"shadowing": shadowing, "scheme": scheme, "se_bits": float(v),
                              "cdf": float(c)} for v, c in zip(st.values, st.cdf)]
            print(f"fig1 {shadowing:>12} {scheme:>12}: {x.size} samples", file=sys.stderr)
    _emit(write_rows_csv(cdf_rows, ["shadowing", "scheme", "se_bits", "cdf"]), out, "fig1_cdf.csv")
    rows = summary_rows(groups, ["shadowing", "scheme"])
    _emit(write_rows_csv(rows, ["shadowing", "scheme", "n_valid_drops", "n_samples", "se95",
                                "median", "mean"]), out, "fig1_summary.csv")
    return EXIT_OK


def cmd_fig2(args) -> int:
    spec = _load_spec(args)
    out = _out_dir(args, spec)
    ku_list = [int(v) for v in args.ku.split(",")]
    schemes = args.schemes.split(",") if args.schemes else FIG2_SCHEMES
    base = spec.base.replace(correlated=False) if not args.correlated else spec.base
    rows = []
    for K in ku_list:
        try:
            cfg = base.replace(K_u=K, eta_ul=None)
        except ConfigError as exc:
            raise ConfigError(f"K_u={K}: {exc}") from exc
        feasible = K <= ep_user_limit(cfg)
        for scheme in schemes:
            recs = run_experiment(ExperimentSpec(cfg, scheme, spec.n_drops, spec.seed),
                                  workers=args.parallel)
            x = pooled_samples(recs)
            rows.append({"K_u": K, "scheme": scheme,
                         "se95": cdf_stats(x).se95 if x.size else float("nan"),
                         "ep_feasible": feasible, "n_samples": int(x.size)})
            print(f"fig2 K_u={K:>3} {scheme:>12}: se95={rows[-1]['se95']:.4g}", file=sys.stderr)
    _emit(write_rows_csv(rows, ["K_u", "scheme", "se95", "ep_feasible", "n_samples"]), out, "fig2.csv")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_all

    results = run_all(quick=args.quick, seed=args.seed or 0)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellfree-otfs", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, drops=True):
        p.add_argument("--config", help="JSON document with 'base' system config and experiment keys")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        if drops:
            p.add_argument("--drops", type=int, help="number of random drops (overrides the config)")
            p.add_argument("--parallel", type=int, default=1, metavar="WORKERS")
        p.add_argument("--out", help="output directory (default: stdout)")

    p = sub.add_parser("run", help="run one experiment spec")
    common(p)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--timing", action="store_true", help="record wall-clock times (non-deterministic)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fig1", help="per-user SE CDFs, correlated and uncorrelated shadowing")
    common(p)
    p.add_argument("--schemes", help=f"comma list, default {','.join(FIG1_SCHEMES)}")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", help="95%%-likely SE versus number of users")
    common(p)
    p.add_argument("--ku", default="2,4,8,12,16,18,19,20", help="comma list of K_u values")
    p.add_argument("--schemes", help=f"comma list, default {','.join(FIG2_SCHEMES)}")
    p.add_argument("--correlated", action="store_true", help="use correlated shadowing")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("validate", help="oracle suites; exit 3 on any failure")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller suites")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("drops", "parallel"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            print(f"error: --{name} must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
