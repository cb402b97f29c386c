"""Command-line interface.

Subcommands: ``rates`` (corner-point printout), ``region`` (distortion
region CSV), ``simulate`` (Monte Carlo trial CSV plus optional CCDF CSV),
``design`` (polar set design dump). Exit codes: 0 success, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from pcq.experiments import (
    ConfigError,
    ExperimentConfig,
    ccdf,
    emit_region_csv,
    make_coding_config,
    read_trials_csv,
    run_experiment,
    write_ccdf_csv,
    write_trials_csv,
)
from pcq.rate_region import corner_params


def _add_source_args(p):
    p.add_argument("--var1", type=float, default=2.5, help="variance of source 1")
    p.add_argument("--var2", type=float, default=2.5, help="variance of source 2")
    p.add_argument("--rho", type=float, default=0.8, help="correlation coefficient")
    p.add_argument("--r1", type=float, default=1.0, help="rate of encoder 1 (bits/symbol)")
    p.add_argument("--r2", type=float, default=2.0, help="rate of encoder 2 (bits/symbol)")


def _add_sim_args(p):
    p.add_argument("--config", help="flat YAML experiment config; flags override")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--blocks", type=int, default=None, help="number of Monte Carlo blocks")
    p.add_argument("--case", choices=["1", "2", "ideal"], default=None, help="pipeline variant")
    p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    p.add_argument("--list-size", type=int, default=None, dest="list_size")
    p.add_argument("--kappa1", type=float, default=None)
    p.add_argument("--kappa2", type=float, default=None)
    p.add_argument("--var-d1", type=float, default=None, dest="var_d1")
    p.add_argument("--var-d2", type=float, default=None, dest="var_d2")


def _experiment_from_args(args) -> ExperimentConfig:
    overrides = dict(
        master_seed=args.seed,
        blocks=args.blocks,
        mode={"1": "case1", "2": "case2", "ideal": "ideal"}.get(args.case),
        workers=args.workers,
        list_size=args.list_size,
        kappa1=args.kappa1,
        kappa2=args.kappa2,
        var_d1=args.var_d1,
        var_d2=args.var_d2,
        out=getattr(args, "out", None),
    )
    if args.config:
        exp = ExperimentConfig.from_file(args.config, **overrides)
    else:
        exp = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    exp.validate()
    return exp


def _cmd_rates(args) -> int:
    from pcq.rate_region import GaussianSourcePair

    src = GaussianSourcePair(args.var1, args.var2, args.rho)
    cp = corner_params(src, args.r1, args.r2)
    print(f"corner point at (R1, R2) = ({args.r1}, {args.r2})")
    print(f"  sigma_d2^2        = {cp.var_d2:.9g}")
    print(f"  sigma_z2_check^2  = {cp.var_z2:.9g}")
    print(f"  sigma_z1_check^2  = {cp.var_z1:.9g}")
    print(f"  var(x1 | u2)      = {cp.var_x1_given_u2:.9g}")
    print(f"  D1                = {cp.D1:.9g}")
    print(f"  D2                = {cp.D2:.9g}")
    print(f"  alpha2            = {cp.alpha2:.9g}")
    print(f"  alpha1            = {cp.alpha1:.9g}")
    print(f"  gamma1            = {cp.gamma1:.9g}")
    print("  lmmse             =")
    for row in cp.lmmse:
        print("      [" + ", ".join(f"{v: .9g}" for v in row) + "]")
    return 0


def _cmd_region(args) -> int:
    from pcq.rate_region import GaussianSourcePair

    markers = {}
    for name, path in (("case1", args.case1_trials), ("case2", args.case2_trials)):
        if path:
            recs = read_trials_csv(path)
            markers[name] = (
                float(np.mean([r.delta1 for r in recs])),
                float(np.mean([r.delta2 for r in recs])),
            )
    src = GaussianSourcePair(args.var1, args.var2, args.rho)
    emit_region_csv(src, args.r1, args.r2, args.grid, args.out, markers or None)
    print(f"wrote region data to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    exp = _experiment_from_args(args)
    cfg = make_coding_config(exp)
    records, summary = run_experiment(exp, cfg)
    print(
        f"{exp.mode}: E[D1] = {summary.mean_delta1:.4f} (se {summary.se_delta1:.4f}), "
        f"E[D2] = {summary.mean_delta2:.4f} (se {summary.se_delta2:.4f}), "
        f"blocks = {summary.blocks}, decode-ok = {summary.decode_ok_rate:.3f}"
    )
    if exp.out:
        write_trials_csv(exp.out, records)
        print(f"wrote trial records to {exp.out}")
    if args.ccdf_out:
        grid = np.linspace(0.0, args.ccdf_max, args.ccdf_points)
        write_ccdf_csv(args.ccdf_out, {1: ccdf(records, 1, grid), 2: ccdf(records, 2, grid)})
        print(f"wrote ccdf data to {args.ccdf_out}")
    return 0


def _cmd_design(args) -> int:
    exp = _experiment_from_args(args)
    cfg = make_coding_config(exp)
    print(f"mode={exp.mode} n={exp.n} list={exp.list_size} "
          f"alpha1={cfg.alpha1_op:.6f} var_z1={cfg.var_z1_model:.6f}")
    for e, spec in enumerate(cfg.polar):
        if spec is None:
            print(f"encoder {e + 1}: ideal sampler (no code)")
            continue
        print(f"encoder {e + 1}: {spec.message_bits} message bits, rate {spec.total_rate:.4f}")
        for lev, lvl in enumerate(spec.levels):
            print(
                f"  level {lev}: frozen={len(lvl.frozen)} info={len(lvl.info)} "
                f"shaped={len(lvl.shaped)}"
            )
            print(f"    info: {' '.join(map(str, lvl.info))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcq", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("rates", help="print the corner-point parameters")
    _add_source_args(pr)
    pr.set_defaults(func=_cmd_rates)

    pg = sub.add_parser("region", help="write the distortion-region CSV")
    _add_source_args(pg)
    pg.add_argument("--grid", type=int, default=200, help="boundary sweep size")
    pg.add_argument("--out", required=True, help="output CSV path")
    pg.add_argument("--case1-trials", help="trial CSV whose means become the case1 marker")
    pg.add_argument("--case2-trials", help="trial CSV whose means become the case2 marker")
    pg.set_defaults(func=_cmd_region)

    ps = sub.add_parser("simulate", help="run the Monte Carlo coding chain")
    _add_sim_args(ps)
    ps.add_argument("--out", help="trial CSV path")
    ps.add_argument("--ccdf-out", help="CCDF CSV path", dest="ccdf_out")
    ps.add_argument("--ccdf-max", type=float, default=1.5, dest="ccdf_max")
    ps.add_argument("--ccdf-points", type=int, default=151, dest="ccdf_points")
    ps.set_defaults(func=_cmd_simulate)

    pd = sub.add_parser("design", help="dump the polar index-set design")
    _add_sim_args(pd)
    pd.set_defaults(func=_cmd_design)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print("configuration error:", file=sys.stderr)
        for off in e.offenses:
            print(f"  - {off}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
