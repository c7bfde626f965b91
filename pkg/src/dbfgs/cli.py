"""Command-line front-end.

    dbfgs run <config-file>            run a config, write CSV traces
    dbfgs reproduce <profile>          run a reproduction suite, print PASS/FAIL
    dbfgs histogram <csv...> -t <v>    exchanges-to-threshold from trace files

Output directory: --outdir, else $DBFGS_OUTDIR, else ./runs.
Exit codes: 0 success, 1 criterion failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .harness import (
    ConfigError,
    PROFILES,
    histogram_exchanges,
    parse_config,
    read_trace_csv,
    reproduce_paper_suite,
    run_experiment,
)


def _outdir(args) -> str:
    if args.outdir:
        return args.outdir
    return os.environ.get("DBFGS_OUTDIR", "runs")


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    outdir = _outdir(args)
    results = run_experiment(cfg, outdir)
    diverged = [r for r in results if r.trace.status == "diverged"]
    print(f"wrote {len(results)} trace(s) to {outdir} "
          f"(config {cfg.config_hash()})")
    for r in diverged:
        print(f"note: {r.method} seed={r.seed} diverged")
    return 0


def _cmd_reproduce(args) -> int:
    seeds = range(args.seeds) if args.seeds else None
    ok, results = reproduce_paper_suite(args.profile, seeds=seeds,
                                        outdir=_outdir(args) if args.save else None)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if ok else 1


def _cmd_histogram(args) -> int:
    paths = []
    for pattern in args.traces:
        paths.extend(sorted(glob.glob(pattern)))
    if not paths:
        print("no trace files matched", file=sys.stderr)
        return 2
    hist = histogram_exchanges([read_trace_csv(p) for p in paths],
                               args.threshold)
    print(f"threshold {args.threshold}")
    for method in sorted(set(hist.counts) | set(hist.censored)):
        qs = hist.quantiles(method)
        reached = len(hist.counts.get(method, []))
        cens = hist.censored.get(method, 0)
        if qs is None:
            print(f"{method}: reached=0 censored={cens}")
        else:
            print(f"{method}: reached={reached} censored={cens} "
                  f"q25={qs[0]:.0f} median={qs[1]:.0f} q75={qs[2]:.0f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dbfgs",
        description="Decentralized BFGS consensus optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--outdir")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("reproduce", help="run a reproduction profile")
    p_rep.add_argument("profile", choices=sorted(PROFILES))
    p_rep.add_argument("--seeds", type=int, default=None,
                       help="number of seeds (default 20)")
    p_rep.add_argument("--save", action="store_true",
                       help="also write the CSV traces")
    p_rep.add_argument("--outdir")
    p_rep.set_defaults(func=_cmd_reproduce)

    p_hist = sub.add_parser("histogram",
                            help="exchanges-to-threshold from trace CSVs")
    p_hist.add_argument("traces", nargs="+")
    p_hist.add_argument("--threshold", "-t", type=float, required=True)
    p_hist.set_defaults(func=_cmd_histogram)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
