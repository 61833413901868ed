"""Cross-run comparison: per-language aggregates, win counts, ordering verdicts."""

import json
from pathlib import Path

import numpy as np

from ..records import read_csv


def load_result_set(run_dir):
    """Test rows and metadata from one run directory."""
    run_dir = Path(run_dir)
    with open(run_dir / "summary.json") as fh:
        summary = json.load(fh)
    rows = [r for r in read_csv(run_dir / "metrics.csv") if r.split == "test"]
    if not rows:
        raise ValueError(f"{run_dir}: no test rows in metrics.csv")
    return {
        "algorithm": summary["algorithm"],
        "support_language": summary["support_language"],
        "languages": sorted({r.language for r in rows}),
        "seeds": sorted({r.seed for r in rows}),
        "rows": rows,
    }


def _per_seed_target_avg(result):
    support = result["support_language"]
    out = {}
    for seed in result["seeds"]:
        vals = [r.exact_match for r in result["rows"]
                if r.seed == seed and r.language != support]
        out[seed] = float(np.mean(vals))
    return out


def compare(result_sets, ordering=None):
    """Compare >= 2 result sets sharing languages and seeds.

    `ordering` is an optional list of algorithm names, best first; the report
    gets one pass/fail verdict per language plus the target average, and the
    count of seeds in which the full ordering holds.
    """
    if len(result_sets) < 2:
        raise ValueError("compare needs at least two result sets")
    languages = result_sets[0]["languages"]
    seeds = result_sets[0]["seeds"]
    support = result_sets[0]["support_language"]
    for rs in result_sets[1:]:
        if rs["languages"] != languages or rs["seeds"] != seeds:
            raise ValueError(
                f"mismatched evaluation sets: {rs['algorithm']} has languages="
                f"{rs['languages']} seeds={rs['seeds']}, expected languages="
                f"{languages} seeds={seeds}")

    report = {"languages": languages, "seeds": seeds, "support_language": support,
              "systems": {}, "pairwise_wins": {}, "warnings": []}
    if len(seeds) == 1:
        report["warnings"].append("single seed: standard deviations are zero by construction")

    by_algo = {}
    for rs in result_sets:
        name = rs["algorithm"]
        if name in by_algo:
            raise ValueError(f"duplicate result set for algorithm {name!r}")
        by_algo[name] = rs
        per_language = {}
        for lang in languages:
            vals = [r.exact_match for r in rs["rows"] if r.language == lang]
            per_language[lang] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
        target_by_seed = _per_seed_target_avg(rs)
        report["systems"][name] = {
            "per_language": per_language,
            "target_average_by_seed": {str(s): v for s, v in target_by_seed.items()},
            "target_average_mean": float(np.mean(list(target_by_seed.values()))),
            "target_average_std": float(np.std(list(target_by_seed.values()))),
        }

    names = list(by_algo)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ta = _per_seed_target_avg(by_algo[a])
            tb = _per_seed_target_avg(by_algo[b])
            wins = sum(1 for s in seeds if ta[s] > tb[s])
            report["pairwise_wins"][f"{a}>{b}"] = {
                "wins": wins, "losses": sum(1 for s in seeds if ta[s] < tb[s]),
                "ties": sum(1 for s in seeds if ta[s] == tb[s]),
            }

    if ordering:
        missing = [n for n in ordering if n not in by_algo]
        if missing:
            raise ValueError(f"ordering names absent from result sets: {missing}")
        verdicts = {}
        for lang in languages:
            means = [report["systems"][n]["per_language"][lang]["mean"] for n in ordering]
            verdicts[lang] = all(means[i] > means[i + 1] for i in range(len(means) - 1))
        target_means = [report["systems"][n]["target_average_mean"] for n in ordering]
        verdicts["target_average"] = all(
            target_means[i] > target_means[i + 1] for i in range(len(target_means) - 1))
        per_seed_holds = 0
        for s in seeds:
            seq = [report["systems"][n]["target_average_by_seed"][str(s)] for n in ordering]
            if all(seq[i] > seq[i + 1] for i in range(len(seq) - 1)):
                per_seed_holds += 1
        report["ordering"] = {
            "hypothesis": list(ordering),
            "verdicts": verdicts,
            "seeds_where_ordering_holds": per_seed_holds,
        }
    return report


def format_report(report):
    lines = []
    for name, stats in sorted(report["systems"].items()):
        lines.append(f"{name}: target avg {stats['target_average_mean']:.4f} "
                     f"+/- {stats['target_average_std']:.4f}")
        for lang, s in sorted(stats["per_language"].items()):
            lines.append(f"  {lang}: {s['mean']:.4f} +/- {s['std']:.4f}")
    for pair, wins in sorted(report["pairwise_wins"].items()):
        lines.append(f"{pair}: wins={wins['wins']} losses={wins['losses']} ties={wins['ties']}")
    if "ordering" in report:
        hyp = " > ".join(report["ordering"]["hypothesis"])
        for scope, ok in report["ordering"]["verdicts"].items():
            lines.append(f"ordering [{hyp}] on {scope}: {'PASS' if ok else 'FAIL'}")
        lines.append(f"ordering holds in {report['ordering']['seeds_where_ordering_holds']}"
                     f"/{len(report['seeds'])} seeds")
    for w in report["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines)
