"""Execute one configured experiment and persist its artifacts.

A run directory contains:

  config.json          resolved configuration (self-describing run)
  corpus.jsonl         the generated corpus, one example per line
  vocab.json           token tables
  metrics.csv          training history plus held-out test rows, all seeds
  summary.json         per-language aggregates across seeds
  seed_<s>/checkpoint.bin
  seed_<s>/pca_<lang>.csv

While a run is in flight an INCOMPLETE marker file sits in the directory; it
is removed as the final step, so its presence flags partial artifacts.
"""

import csv
import json
import time
from pathlib import Path

import numpy as np

from .. import meta, metrics, models, tasks
from ..params import save_checkpoint
from ..records import MetricsRecord, write_csv

MARKER = "INCOMPLETE"


def _record_sort_key(r):
    return (r.seed, r.step, r.split, r.language)


def build_corpus(config):
    c = config.corpus
    return tasks.generate_corpus(c["num_templates"], c["entities_per_slot"],
                                 config.language_specs(), c["num_pairs"], c["seed"])


def build_spec(config, corpus):
    m = config.model
    return models.Seq2SeqParserSpec(
        input_vocab_size=len(corpus.input_vocab),
        output_vocab_size=len(corpus.output_vocab),
        embed_dim=m["embed_dim"],
        hidden_dim=m["hidden_dim"],
        max_decode_len=m["max_decode_len"],
    )


def run_seed(config, corpus, spec, seed):
    """Train one seed and evaluate on the held-out test split."""
    split = tasks.split_sample(corpus, config.split["strategy"], config.split["rate"],
                               seed, config.split["val_frac"], config.split["test_frac"])
    cfg = config.episode_config()
    train_cfg = config.train_config(seed)
    started = time.perf_counter()
    params, history = meta.train(spec, config.algorithm, split, cfg, train_cfg)
    final_step = max((r.step for r in history), default=0)
    template = MetricsRecord(algorithm=config.algorithm, seed=seed, k=cfg.k,
                             rate=split.rate, step=final_step, split="test",
                             language="", exact_match=0.0, loss=0.0,
                             cosine_to_support=0.0, hausdorff_to_support=0.0,
                             wall_seconds=0.0)
    test_rows = meta.evaluate_split(spec, params, split.test, corpus.support_language,
                                    template, "test", final_step, started)
    return params, split, history + test_rows


def _pca_files(out_dir, spec, params, split, support_language):
    """Joint-basis PCA over all languages' test encodings, one CSV per language."""
    langs = sorted(split.test)
    blocks = {lang: models.encode_batch(spec, params, split.test[lang]) for lang in langs}
    stacked = np.vstack([blocks[lang] for lang in langs])
    coords, fractions = metrics.pca_project(stacked, dims=2)
    offset = 0
    for lang in langs:
        examples = split.test[lang]
        with open(out_dir / f"pca_{lang}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["language", "pair_id", "pc1", "pc2"])
            for i, ex in enumerate(examples):
                writer.writerow([lang, ex.pair_id,
                                 repr(coords[offset + i, 0]), repr(coords[offset + i, 1])])
        offset += len(examples)
    return [float(f) for f in fractions]


def summarize(config, records, support_language):
    """Across-seed aggregates of the test rows."""
    test = [r for r in records if r.split == "test"]
    langs = sorted({r.language for r in test})
    seeds = sorted({r.seed for r in test})
    per_language = {}
    for lang in langs:
        ems = [r.exact_match for r in test if r.language == lang]
        per_language[lang] = {
            "exact_match_mean": float(np.mean(ems)),
            "exact_match_std": float(np.std(ems)),
            "cosine_to_support_mean": float(np.mean(
                [r.cosine_to_support for r in test if r.language == lang])),
            "hausdorff_to_support_mean": float(np.mean(
                [r.hausdorff_to_support for r in test if r.language == lang])),
        }
    target_langs = [l for l in langs if l != support_language]
    target_avgs = {
        seed: float(np.mean([r.exact_match for r in test
                             if r.seed == seed and r.language in target_langs]))
        for seed in seeds
    } if target_langs else {}
    return {
        "algorithm": config.algorithm,
        "support_language": support_language,
        "languages": langs,
        "seeds": seeds,
        "per_language": per_language,
        "target_average_by_seed": {str(s): v for s, v in target_avgs.items()},
        "target_average_mean": float(np.mean(list(target_avgs.values()))) if target_avgs else None,
        "target_average_std": float(np.std(list(target_avgs.values()))) if target_avgs else None,
    }


def run(config, out_dir):
    """Full experiment: corpus, per-seed training, evaluation, artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / MARKER
    marker.write_text("run in progress or aborted\n")

    with open(out / "config.json", "w") as fh:
        fh.write(json.dumps(config.resolved(), indent=2, sort_keys=True) + "\n")
    corpus = build_corpus(config)
    tasks.write_corpus_jsonl(corpus, out / "corpus.jsonl")
    tasks.write_vocab_json(corpus, out / "vocab.json")
    spec = build_spec(config, corpus)

    all_records = []
    pca_fractions = {}
    for seed in config.seeds:
        params, split, records = run_seed(config, corpus, spec, seed)
        all_records.extend(records)
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        save_checkpoint(seed_dir / "checkpoint.bin", params)
        pca_fractions[str(seed)] = _pca_files(seed_dir, spec, params, split,
                                              corpus.support_language)

    all_records.sort(key=_record_sort_key)
    write_csv(out / "metrics.csv", all_records)
    summary = summarize(config, all_records, corpus.support_language)
    summary["pca_explained_variance"] = pca_fractions
    with open(out / "summary.json", "w") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    marker.unlink()
    return summary


def canonical_csv_bytes(path, drop=("wall_seconds",)):
    """CSV bytes with the named columns removed; the reproducibility view."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keep = [i for i, name in enumerate(rows[0]) if name not in drop]
    out = "\n".join(",".join(row[i] for i in keep) for row in rows)
    return out.encode("utf-8")
