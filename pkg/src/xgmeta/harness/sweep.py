"""Sweeps over one experiment axis, with per-point failure isolation.

A sweep point is one (axis value, seed) pair executed as an independent run
in its own subdirectory. Points run in a process pool when jobs > 1; a
failing point is recorded and skipped, never fatal to the rest.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..records import read_csv, write_csv
from .config import ExperimentConfig
from .runner import _record_sort_key, run

AXES = {
    "K": ("episode", "k"),
    "rate": ("split", "rate"),
    "batch_size": ("episode", "batch_size"),
}


def _point_config(base, axis, value, seed):
    section, key = AXES[axis]
    cast = int if axis in ("K", "batch_size") else float
    return base.with_overrides(**{section: {key: cast(value)}, "seeds": [seed]})


def _run_point(args):
    document, axis, value, seed, out_dir = args
    config = _point_config(ExperimentConfig(document), axis, value, seed)
    run(config, out_dir)
    return out_dir


def sweep(base_config, axis, values, out_dir, jobs=1):
    """One run per (value, seed); merged CSV plus per-value aggregates."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    if not values:
        raise ValueError("values must be nonempty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    document = base_config.resolved()
    points = [(document, axis, value, seed,
               str(out / f"{axis}_{value}" / f"seed_{seed}"))
              for value in values for seed in base_config.seeds]

    failures = {}

    def note_failure(point, exc):
        failures[point[4]] = f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_point, p): p for p in points}
            for future, point in futures.items():
                try:
                    future.result()
                except Exception as exc:
                    note_failure(point, exc)
    else:
        for point in points:
            try:
                _run_point(point)
            except Exception as exc:
                note_failure(point, exc)

    merged = []
    by_value = {str(v): {} for v in values}
    for _, _, value, seed, point_dir in points:
        if point_dir in failures:
            continue
        rows = read_csv(Path(point_dir) / "metrics.csv")
        rows.sort(key=_record_sort_key)
        merged.extend(rows)
        with open(Path(point_dir) / "summary.json") as fh:
            point_summary = json.load(fh)
        by_value[str(value)][str(seed)] = point_summary["target_average_mean"]
    write_csv(out / "metrics.csv", merged)

    summary = {"axis": axis, "values": [str(v) for v in values],
               "by_value": {}, "failures": failures}
    for value in values:
        per_seed = [v for v in by_value[str(value)].values() if v is not None]
        summary["by_value"][str(value)] = {
            "target_average_by_seed": by_value[str(value)],
            "target_exact_match_mean": float(np.mean(per_seed)) if per_seed else None,
            "target_exact_match_std": float(np.std(per_seed)) if per_seed else None,
        }
    with open(out / "summary.json", "w") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
