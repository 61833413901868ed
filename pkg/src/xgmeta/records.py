"""Evaluation rows and their CSV schema.

One MetricsRecord is one (evaluation point, language) row. The CSV column
order below is the stable on-disk schema; `wall_seconds` is the only column
excluded from reproducibility comparisons.
"""

import csv
from dataclasses import dataclass, fields


@dataclass
class MetricsRecord:
    algorithm: str
    seed: int
    k: int
    rate: float
    step: int
    split: str
    language: str
    exact_match: float
    loss: float
    cosine_to_support: float
    hausdorff_to_support: float
    wall_seconds: float

    def __post_init__(self):
        if not (0.0 <= self.exact_match <= 1.0):
            raise ValueError(f"exact_match out of range: {self.exact_match}")
        if self.step < 0:
            raise ValueError("step must be non-negative")


CSV_COLUMNS = [f.name for f in fields(MetricsRecord)]


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([_format(getattr(r, c)) for c in CSV_COLUMNS])


def read_csv(path):
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(MetricsRecord(
                algorithm=row["algorithm"],
                seed=int(row["seed"]),
                k=int(row["k"]),
                rate=float(row["rate"]),
                step=int(row["step"]),
                split=row["split"],
                language=row["language"],
                exact_match=float(row["exact_match"]),
                loss=float(row["loss"]),
                cosine_to_support=float(row["cosine_to_support"]),
                hausdorff_to_support=float(row["hausdorff_to_support"]),
                wall_seconds=float(row["wall_seconds"]),
            ))
    return out
