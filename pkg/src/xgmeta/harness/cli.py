"""Command-line entry point.

Subcommands:
  run                train one configured experiment
  sweep              repeat it along one axis (K, rate, batch_size)
  verify-gradients   run the gradient-identity suite, write a JSON report
  analyze            recompute PCA/similarity from a run's checkpoints
  compare            aggregate and order finished runs
"""

import argparse
import json
import sys
from pathlib import Path

from .. import analysis
from .analyze import analyze
from .compare import compare, format_report, load_result_set
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .runner import run
from .sweep import AXES, sweep


def _load(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed:
        config = config.with_overrides(seeds=list(args.seed))
    return config


def _add_common(parser, with_jobs=False):
    parser.add_argument("--config", metavar="PATH", help="experiment config JSON")
    parser.add_argument("--seed", metavar="N", type=int, action="append",
                        help="override config seeds (repeatable)")
    parser.add_argument("--out", metavar="DIR", default="results",
                        help="output directory (default: results)")
    parser.add_argument("--print-config", action="store_true",
                        help="print the resolved config and exit")
    if with_jobs:
        parser.add_argument("--jobs", metavar="N", type=int, default=1,
                            help="parallel worker processes (default: 1)")


def main(argv=None):
    try:
        return _main(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _main(argv):
    parser = argparse.ArgumentParser(prog="xgmeta",
                                     description="cross-lingual meta-learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configured experiment")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run the experiment along one axis")
    _add_common(p_sweep, with_jobs=True)
    p_sweep.add_argument("--axis", required=True, choices=sorted(AXES))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values, e.g. 1,5,10,50")

    p_verify = sub.add_parser("verify-gradients", help="gradient identity suite")
    p_verify.add_argument("--out", metavar="DIR", default="results")
    p_verify.add_argument("--seeds", metavar="N", type=int, default=20,
                          help="number of verification seeds (default: 20)")

    p_analyze = sub.add_parser("analyze", help="PCA/similarity from checkpoints")
    p_analyze.add_argument("--run", metavar="DIR", required=True, dest="run_dir")
    p_analyze.add_argument("--out", metavar="DIR", default=None)

    p_compare = sub.add_parser("compare", help="compare finished runs")
    p_compare.add_argument("runs", nargs="+", metavar="DIR")
    p_compare.add_argument("--order", metavar="A,B,C",
                           help="ordering hypothesis, best algorithm first")
    p_compare.add_argument("--out", metavar="DIR", default=None)

    args = parser.parse_args(argv)

    if args.command == "run":
        config = _load(args)
        if args.print_config:
            print(dump_config(config))
            return 0
        summary = run(config, args.out)
        for lang, stats in sorted(summary["per_language"].items()):
            print(f"{lang}: exact match {stats['exact_match_mean']:.4f} "
                  f"+/- {stats['exact_match_std']:.4f}")
        if summary["target_average_mean"] is not None:
            print(f"target average: {summary['target_average_mean']:.4f}")
        return 0

    if args.command == "sweep":
        config = _load(args)
        if args.print_config:
            print(dump_config(config))
            return 0
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        summary = sweep(config, args.axis, values, args.out, jobs=args.jobs)
        for value in summary["values"]:
            stats = summary["by_value"][value]
            mean = stats["target_exact_match_mean"]
            shown = "failed" if mean is None else f"{mean:.4f}"
            print(f"{args.axis}={value}: target exact match {shown}")
        for point, err in summary["failures"].items():
            print(f"FAILED {point}: {err}", file=sys.stderr)
        return 1 if summary["failures"] else 0

    if args.command == "verify-gradients":
        report = analysis.run_verification(seeds=range(args.seeds))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "gradcheck_report.json"
        with open(path, "w") as fh:
            fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
        failed = [e for e in report if not e["pass"]]
        by_name = {}
        for e in report:
            by_name.setdefault(e["identity"], []).append(e["pass"])
        for name, passes in sorted(by_name.items()):
            print(f"{name}: {sum(passes)}/{len(passes)} pass")
        print(f"report written to {path}")
        return 1 if failed else 0

    if args.command == "analyze":
        report = analyze(args.run_dir, args.out)
        for seed, entry in sorted(report["seeds"].items()):
            for lang, sim in sorted(entry["similarity"].items()):
                print(f"seed {seed} {lang}: cosine {sim['cosine_to_support']:.4f} "
                      f"hausdorff {sim['hausdorff_to_support']:.4f}")
        return 0

    if args.command == "compare":
        sets = [load_result_set(d) for d in args.runs]
        ordering = [s.strip() for s in args.order.split(",")] if args.order else None
        report = compare(sets, ordering)
        print(format_report(report))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "compare.json", "w") as fh:
                fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
