"""Command-line entry point: ``prbeam {run,sweep,trace-run,verify-assumptions}``.

Log verbosity comes from the ``PRBEAM_LOG_LEVEL`` environment variable
(default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AnalysisConfig, concentration_check, fit_assumption2, fit_assumption3, theoretical_M
from .channel import ChannelParams, make_default_grids
from .config import SyntheticSpec, TraceSpec, load_config
from .errors import ConfigError, PrBeamError
from .runner import build_codebook, run_experiment, summary_path

def _print_summary(report, out=None):
    out = out or sys.stdout
    for spec in report.config.policies:
        s = report.summaries[spec.label]
        print(f"{spec.label:>24s}  norm_regret(T={report.config.horizon}) = "
              f"{s.final_mean:.4f} +- {s.final_stderr:.4f}   {report.ms_per_step[spec.label]:.3f} ms/step", file=out)


def cmd_run(args):
    cfg = load_config(args.config)
    if not isinstance(cfg.env, SyntheticSpec):
        raise ConfigError("'run' needs a [channel] section; use 'trace-run' for trace experiments")
    cfg = _apply_overrides(cfg, args)
    report = run_experiment(cfg)
    _print_summary(report)
    if cfg.output:
        print(f"wrote {cfg.output} and {summary_path(cfg.output)}")
    return 0


def cmd_trace_run(args):
    cfg = load_config(args.config)
    if not isinstance(cfg.env, TraceSpec):
        raise ConfigError("'trace-run' needs a [trace] section")
    cfg = _apply_overrides(cfg, args)
    report = run_experiment(cfg)
    _print_summary(report)
    if cfg.output:
        print(f"wrote {cfg.output} and {summary_path(cfg.output)}")
    return 0


def cmd_sweep(args):
    cfg = _apply_overrides(load_config(args.config), args)
    seeds = cfg.seeds or (cfg.seed,)
    horizons = cfg.horizons or (cfg.horizon,)
    outdir = Path(args.outdir) if args.outdir else (
        cfg.output.parent / (cfg.output.stem + "_sweep") if cfg.output else Path("sweep"))
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for T in horizons:
        for seed in seeds:
            out = outdir / f"T{T}_seed{seed}.csv"
            report = run_experiment(cfg.with_overrides(horizon=T, seed=seed, output=out))
            for spec in cfg.policies:
                s = report.summaries[spec.label]
                rows.append([spec.label, T, seed, repr(s.final_mean), repr(s.final_stderr),
                             f"{report.ms_per_step[spec.label]:.6f}"])
            print(f"T={T} seed={seed}")
            _print_summary(report)
    with (outdir / "sweep_summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "horizon", "seed", "final_norm_regret_mean", "final_norm_regret_stderr", "ms_per_step"])
        w.writerows(rows)
    print(f"wrote {len(rows)} summary rows to {outdir / 'sweep_summary.csv'}")
    return 0


def cmd_verify(args):
    cfg = load_config(args.config)
    env = cfg.env
    if not isinstance(env, SyntheticSpec) or env.thetas_deg is None or env.gains is None:
        raise ConfigError("verify-assumptions needs explicit thetas_deg and gains in [channel]")
    acfg = AnalysisConfig(r_max=args.r_max, delta=args.delta, trials=max(args.trials, 1))
    codebook = build_codebook(cfg)
    grids = make_default_grids(cfg.grid)
    truth = ChannelParams.from_degrees(env.thetas_deg, env.gains)
    a2 = fit_assumption2(truth, grids, codebook)
    a3 = fit_assumption3(truth, grids, codebook)
    sigma = env.sigma
    M = theoretical_M(cfg.horizon, truth.k, sigma, grids.gains.size, grids.angles.size)
    quantities = [
        ("C1", a2.first), ("C2", a2.second), ("assumption2_feasible", int(a2.feasible)),
        ("assumption2_worst_slack", a2.worst_slack),
        ("C3", a3.first), ("C4", a3.second), ("assumption3_feasible", int(a3.feasible)),
        ("assumption3_worst_slack", a3.worst_slack),
        ("R_max", acfg.r_max), ("theoretical_M", M),
    ]
    print(f"truth: {truth!r}")
    print(f"grid: {grids.angles.size} angles x {grids.gains.size} gains, k={truth.k}")
    print(f"quadratic lower bound: C1={a2.first:.6g} C2={a2.second:.6g} "
          f"feasible={'yes' if a2.feasible else 'no'}")
    print(f"    tightest candidate {a2.worst_candidate!r} slack={a2.worst_slack:.6g}")
    print(f"local Lipschitz bound: C3={a3.first:.6g} C4={a3.second:.6g} "
          f"feasible={'yes' if a3.feasible else 'no'}")
    print(f"    tightest candidate {a3.worst_candidate!r} slack={a3.worst_slack:.6g}")
    print(f"theoretical exploration length M(T={cfg.horizon}, sigma={sigma}) = {M}")
    if args.trials > 0:
        check_M = args.check_M or M
        cov = concentration_check(truth, codebook, grids, truth.k, check_M, acfg.delta, sigma,
                                  acfg.trials, np.random.default_rng(cfg.seed))
        quantities.append(("concentration_coverage", cov))
        print(f"data-norm concentration: coverage {cov:.4f} over {acfg.trials} trials "
              f"(M={check_M}, delta={acfg.delta}, target >= {1 - acfg.delta:.3f})")
    out = Path(args.output) if args.output else (cfg.output.with_name(cfg.output.stem + "_assumptions.csv")
                                                 if cfg.output else None)
    if out is not None:
        with out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "value"])
            for name, value in quantities:
                w.writerow([name, repr(value) if isinstance(value, float) else value])
        print(f"wrote {out}")
    return 0


def _apply_overrides(cfg, args):
    kw = {}
    if getattr(args, "output", None):
        kw["output"] = Path(args.output)
    if getattr(args, "workers", None):
        kw["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    return cfg.with_overrides(**kw) if kw else cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prbeam", description="Physics-informed bandits for mmWave beam alignment.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in [("run", cmd_run, "run one synthetic experiment"),
                            ("trace-run", cmd_trace_run, "run on a measured RSS trace")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
        sp.add_argument("-o", "--output", help="override the output CSV path")
        sp.add_argument("-j", "--workers", type=int, help="parallel repetition workers")
        sp.add_argument("--seed", type=int, help="override the root seed")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("sweep", help="cartesian product over policies, seeds and horizons")
    sp.add_argument("config")
    sp.add_argument("--outdir", help="directory for per-run CSVs (default: <output>_sweep)")
    sp.add_argument("-j", "--workers", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify-assumptions", help="fit the analysis constants on one instance")
    sp.add_argument("config")
    sp.add_argument("-o", "--output", help="CSV of fitted quantities")
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--r-max", type=float, default=70.0)
    sp.add_argument("--trials", type=int, default=0, help="Monte-Carlo trials for the concentration check")
    sp.add_argument("--check-M", type=int, help="samples per concentration trial (default: theoretical M)")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    level = os.environ.get("PRBEAM_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        print(f"prbeam: warning: unknown PRBEAM_LOG_LEVEL {level!r}, using WARNING", file=sys.stderr)
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PrBeamError as exc:
        print(f"prbeam: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"prbeam: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
